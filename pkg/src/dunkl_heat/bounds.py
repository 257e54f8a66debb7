"""The rational factor Lambda(x, y, t), volume comparables and the two-sided envelope.

Lambda sums, over words of positive roots of length <= 2|G| that carry y
into the closed Weyl chamber of x, the products

    rho = prod_j (1 + |x - z_j| / sqrt(t))^(-2)

where z_0 = y and z_j is the image of y after the first j reflections (the
last point of the word contributes no factor).  Because every factor depends
only on the group element reached so far, Lambda is computed exactly by a
dynamic program over (length, group element); the raw enumeration is kept as
an oracle for short words.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .errors import (DomainError, InvalidParameterError, OracleTooLargeError,
                     UnsupportedDimensionError)
from .rootsys import (CHAMBER_TOL, ReflectionGroup, RootSystem, _tol, chamber_mask,
                      orbit_distances, reflect, reflection_counts)

DEFAULT_WORD_CAP = 10**7


def _check_t(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError("t must be positive")


def rho(rs: RootSystem, x, y, t, word) -> float:
    """rho_alpha(x, y, t) for a word of root indices; 1 for the empty word."""
    _check_t(t)
    x = np.asarray(x, dtype=float)
    z = np.asarray(y, dtype=float)
    st = np.sqrt(t)
    val = 1.0
    for a in word:
        val *= (1.0 + np.linalg.norm(x - z) / st) ** -2
        z = reflect(rs, a, z)
    return float(val)


@dataclass(frozen=True)
class AdmissibleSeq:
    root_indices: tuple
    element: int

    @property
    def length(self) -> int:
        return len(self.root_indices)


def _words(rs: RootSystem, length: int) -> np.ndarray:
    pos = np.array(rs.positive, dtype=np.int64)
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(pos, repeat=length)), dtype=np.int64)


def _check_cap(rs: RootSystem, max_len: int, cap: int):
    total = sum(len(rs.positive) ** L for L in range(max_len + 1))
    if total > cap:
        raise OracleTooLargeError(
            f"{total} words of length <= {max_len} exceed the oracle cap {cap}; shrink max_len")


def enumerate_admissible(rs: RootSystem, grp: ReflectionGroup, x, y, max_len: int,
                         cap: int = DEFAULT_WORD_CAP, chamber_tol=CHAMBER_TOL) -> list:
    """All positive-root words of length <= max_len admissible for (x, y)."""
    _check_cap(rs, max_len, cap)
    goal = chamber_mask(grp, x, y, chamber_tol)
    out = []
    for L in range(max_len + 1):
        for w in _words(rs, L):
            g = grp.word_element(w)
            if goal[g]:
                out.append(AdmissibleSeq(tuple(int(a) for a in w), g))
    return out


def lambda_bruteforce(rs: RootSystem, grp: ReflectionGroup, x, y, t, max_len: int,
                      cap: int = DEFAULT_WORD_CAP, chamber_tol=CHAMBER_TOL) -> float:
    """Lambda truncated to words of length <= max_len, by explicit enumeration.

    Each word is applied to y reflection by reflection (no group tables);
    only the chamber test reuses d(x, y).
    """
    _check_t(t)
    _check_cap(rs, max_len, cap)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = orbit_distances(grp, x, y).min()
    tol = float(_tol(x, y, chamber_tol))
    st = np.sqrt(t)
    roots = rs.roots
    total = 0.0
    for L in range(max_len + 1):
        words = _words(rs, L)
        z = np.broadcast_to(y, (len(words), rs.dim)).copy()
        val = np.ones(len(words))
        for j in range(L):
            val *= (1.0 + np.linalg.norm(x - z, axis=1) / st) ** -2
            a = roots[words[:, j]]
            z -= (np.einsum("wi,wi->w", z, a))[:, None] * a  # |alpha|^2 = 2
        ok = np.linalg.norm(x - z, axis=1) <= d + tol
        total += float(np.sum(val[ok]))
    return total


def lambda_dp_batch(rs: RootSystem, grp: ReflectionGroup, X, Y, T, max_len: int | None = None,
                    chamber_tol=CHAMBER_TOL) -> np.ndarray:
    """Lambda(x, y, t) for stacked inputs X (P, N), Y (P, N), T (P,).

    S[l, g] is the total rho-weight of words of length l ending at element g;
    S[l+1, sigma_a g] += S[l, g] * (1 + |x - g(y)| / sqrt(t))^(-2).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    T = np.broadcast_to(np.asarray(T, dtype=float), (X.shape[0],))
    _check_t(T)
    if max_len is None:
        max_len = 2 * grp.order
    dist = orbit_distances(grp, X, Y)                      # (P, G)
    goal = dist <= dist.min(axis=1, keepdims=True) + _tol(X, Y, chamber_tol)[:, None]
    f = (1.0 + dist / np.sqrt(T)[:, None]) ** -2
    S = np.zeros_like(dist)
    S[:, grp.identity_index] = 1.0
    lam = np.where(goal, S, 0.0).sum(axis=1)
    perms = [grp.cayley[:, a] for a in rs.positive]
    for _ in range(max_len):
        out = S * f
        nxt = np.zeros_like(S)
        for p in perms:
            nxt[:, p] += out
        S = nxt
        lam += np.where(goal, S, 0.0).sum(axis=1)
    return lam


def lambda_dp(rs: RootSystem, grp: ReflectionGroup, x, y, t, max_len: int | None = None,
              chamber_tol=CHAMBER_TOL) -> float:
    """Exact Lambda(x, y, t) (words up to 2|G| unless max_len is given)."""
    return float(lambda_dp_batch(rs, grp, [x], [y], [t], max_len, chamber_tol)[0])


def lambda_dihedral_batch(rs: RootSystem, grp: ReflectionGroup, X, Y, T,
                          chamber_tol=CHAMBER_TOL) -> np.ndarray:
    if rs.family != "dihedral":
        raise InvalidParameterError("Lambda_D is defined for dihedral root systems only")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    T = np.broadcast_to(np.asarray(T, dtype=float), (X.shape[0],))
    _check_t(T)
    st = np.sqrt(T)
    n = reflection_counts(rs, grp, X, Y, chamber_tol)
    first = (1.0 + np.linalg.norm(X - Y, axis=1) / st) ** -2
    refl = np.stack([reflect(rs, a, Y) for a in rs.positive], axis=1)   # (P, m, 2)
    second = ((1.0 + np.linalg.norm(X[:, None, :] - refl, axis=2) / st[:, None]) ** -2).sum(axis=1)
    return np.select([n == 0, n == 1], [np.ones_like(first), first], first * second)


def lambda_dihedral(rs: RootSystem, grp: ReflectionGroup, x, y, t, chamber_tol=CHAMBER_TOL) -> float:
    """Lambda_D: 1, (1+|x-y|/sqrt t)^-2, or that times sum over R+ of (1+|x-sigma_a y|/sqrt t)^-2
    according to n(x, y) = 0, 1, 2."""
    return float(lambda_dihedral_batch(rs, grp, [x], [y], [t], chamber_tol)[0])


def log_volume_comparable(rs: RootSystem, X, r) -> np.ndarray:
    """log of r^N prod_{alpha in R} (|<x, alpha>| + r)^k(alpha); X may be stacked (..., N)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("radius must be positive")
    X = np.asarray(X, dtype=float)
    proj = np.abs(X @ rs.roots.T)                                   # (..., |R|)
    return rs.dim * np.log(r) + (rs.mult * np.log(proj + r[..., None])).sum(axis=-1)


def volume_comparable(rs: RootSystem, x, r) -> float:
    return float(np.exp(log_volume_comparable(rs, np.asarray(x, dtype=float), np.asarray(r, dtype=float))))


def weight(rs: RootSystem, x) -> np.ndarray:
    """w(x) = prod_{alpha in R} |<x, alpha>|^k(alpha)."""
    x = np.asarray(x, dtype=float)
    return np.prod(np.abs(x @ rs.roots.T) ** rs.mult, axis=-1)


def _disc_integral(f, center, r, lines, rtol):
    """Integral of f over the disc |z - center| <= r in polar coordinates about the center.

    ``lines`` are pairs (a, b) describing kinks of f along {<z, a> = b};
    their crossings are handed to the adaptive rule as break points.
    """
    c = np.asarray(center, dtype=float)

    def ray_breaks(phi):
        u = np.array([np.cos(phi), np.sin(phi)])
        pts = []
        for a, b in lines:
            au = a @ u
            if abs(au) > 1e-14:
                s = (b - a @ c) / au
                if 0.0 < s < r:
                    pts.append(s)
        return sorted(pts)

    def inner(phi):
        u = np.array([np.cos(phi), np.sin(phi)])
        val, _ = integrate.quad(lambda s: f(c + s * u) * s, 0.0, r, points=ray_breaks(phi) or None,
                                epsabs=0.0, epsrel=rtol * 0.1, limit=200)
        return val

    # angles where a kink line meets the circle
    phis = []
    for a, b in lines:
        a = np.asarray(a, dtype=float)
        na = np.linalg.norm(a)
        if na == 0:
            continue
        dist = (b - a @ c) / na             # signed distance of center to the line
        if abs(dist) < r:
            base = np.arctan2(a[1], a[0])
            half = np.arccos(dist / r)
            phis += [(base + half) % (2 * np.pi), (base - half) % (2 * np.pi)]
    phis = sorted(set(p for p in phis if 1e-12 < p < 2 * np.pi - 1e-12))
    val, _ = integrate.quad(inner, 0.0, 2 * np.pi, points=phis or None, epsabs=0.0,
                            epsrel=rtol * 0.3, limit=200)
    return val


def exact_ball_volume(rs: RootSystem, x, r, rtol: float = 1e-6) -> float:
    """w(B(x, r)) by adaptive quadrature of the density w over the Euclidean ball (N <= 3)."""
    if r <= 0:
        raise DomainError("radius must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    N = rs.dim
    if N > 3:
        raise UnsupportedDimensionError(f"exact ball volume supports N <= 3, got N={N}")
    R = rs.positive_roots
    if N == 1:
        lo, hi = x[0] - r, x[0] + r
        pts = [0.0] if lo < 0.0 < hi else None
        val, _ = integrate.quad(lambda u: weight(rs, np.array([u])), lo, hi, points=pts,
                                epsabs=0.0, epsrel=rtol * 0.1, limit=200)
        return float(val)
    if N == 2:
        lines = [(a, 0.0) for a in R]
        return float(_disc_integral(lambda z: weight(rs, z), x, r, lines, rtol))

    def slice_integral(z1):
        rho_ = np.sqrt(max(r * r - (z1 - x[0]) ** 2, 0.0))
        if rho_ == 0.0:
            return 0.0
        lines = [(a[1:], -z1 * a[0]) for a in R if np.linalg.norm(a[1:]) > 1e-14]
        return _disc_integral(lambda z: weight(rs, np.concatenate(([z1], z))), x[1:], rho_, lines,
                              rtol * 0.3)

    pts = [0.0] if x[0] - r < 0.0 < x[0] + r else None
    val, _ = integrate.quad(slice_integral, x[0] - r, x[0] + r, points=pts, epsabs=0.0,
                            epsrel=rtol * 0.3, limit=100)
    return float(val)


def euclidean_ball_volume(N: int, r: float) -> float:
    return float(np.pi ** (N / 2) / gamma(N / 2 + 1) * r**N)


def log_envelope_batch(rs: RootSystem, grp: ReflectionGroup, X, Y, T, c: float,
                       lambda_mode: str = "dp", chamber_tol=CHAMBER_TOL) -> np.ndarray:
    """log of V(x, sqrt t)^-1 exp(-c d(x,y)^2 / t) Lambda(x, y, t) for stacked inputs."""
    if c <= 0:
        raise DomainError("exponent constant c must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    T = np.broadcast_to(np.asarray(T, dtype=float), (X.shape[0],))
    _check_t(T)
    d = orbit_distances(grp, X, Y).min(axis=1)
    if lambda_mode == "dp":
        lam = lambda_dp_batch(rs, grp, X, Y, T, chamber_tol=chamber_tol)
    elif lambda_mode == "dihedral":
        lam = lambda_dihedral_batch(rs, grp, X, Y, T, chamber_tol)
    else:
        raise InvalidParameterError(f"unknown lambda_mode {lambda_mode!r}")
    return -log_volume_comparable(rs, X, np.sqrt(T)) - c * d**2 / T + np.log(lam)


def envelope(rs: RootSystem, grp: ReflectionGroup, x, y, t, c: float, lambda_mode: str = "dp") -> float:
    """V(x, sqrt t)^-1 exp(-c d(x,y)^2/t) Lambda(x,y,t), the volume comparable standing in for w(B)."""
    return float(np.exp(log_envelope_batch(rs, grp, [x], [y], [t], c, lambda_mode)[0]))
