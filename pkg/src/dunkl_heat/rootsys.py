"""Normalized root systems, their reflection groups, and orbit geometry.

Two families are supported: products of rank-one systems (group Z_2^N,
roots +-sqrt(2) e_i) and the dihedral systems I_2(m) of the regular
m-gon.  Roots always have Euclidean norm sqrt(2).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, NonFiniteGroupError

SQRT2 = np.sqrt(2.0)
CHAMBER_TOL = 1e-9
GROUP_TOL = 1e-9
DEFAULT_GROUP_CAP = 10_000


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RootSystem:
    """A normalized root system R with multiplicity function k.

    ``roots`` has shape (|R|, N); ``positive`` indexes a positive subsystem
    R_+; ``mult[i]`` is k(roots[i]).
    """

    roots: np.ndarray
    positive: tuple
    mult: np.ndarray
    family: str
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.roots.shape[1]

    @property
    def n_roots(self) -> int:
        return self.roots.shape[0]

    @property
    def homogeneous_dim(self) -> float:
        """N + sum_{alpha in R} k(alpha)."""
        return self.dim + float(np.sum(self.mult))

    @property
    def positive_roots(self) -> np.ndarray:
        return self.roots[list(self.positive)]

    def to_config(self) -> dict:
        cfg = {"family": self.family}
        cfg.update(self.params)
        cfg["positive_roots"] = [int(i) for i in self.positive]
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "RootSystem":
        family = cfg.get("family")
        if family == "product_a1":
            k = cfg["k"]
            N = int(cfg.get("N", len(k)))
            return build_product_A1(N, k)
        if family == "dihedral":
            return build_dihedral(int(cfg["m"]), cfg["k_even"], cfg.get("k_odd", cfg["k_even"]))
        raise InvalidParameterError(f"unknown root-system family {family!r}")


def build_product_A1(N: int, k) -> RootSystem:
    """Product system A_1^N: roots +-sqrt(2) e_i with multiplicity k_i."""
    k = [float(v) for v in np.atleast_1d(k)]
    if N < 1 or len(k) != N:
        raise InvalidParameterError(f"need N >= 1 and len(k) == N, got N={N}, k={k}")
    if any(not v > 0 for v in k):
        raise InvalidParameterError(f"multiplicities must be positive, got {k}")
    roots, mult = [], []
    for i in range(N):
        e = np.zeros(N)
        e[i] = SQRT2
        roots += [e, -e]
        mult += [k[i], k[i]]
    rs = RootSystem(_frozen(roots), tuple(range(0, 2 * N, 2)), _frozen(mult),
                    "product_a1", {"N": N, "k": k})
    validate_root_system(rs)
    return rs


def build_dihedral(m: int, k_even: float, k_odd: float | None = None) -> RootSystem:
    """Root system of the symmetry group of a regular m-gon.

    alpha_j = sqrt(2) (sin(pi j/m), cos(pi j/m)), j = 0..2m-1.  The positive
    subsystem is j = 0..m-1 (separated from its negative by the line
    orthogonal to (1, eps) for small eps > 0).  Multiplicity is k_even for
    even j mod m and k_odd for odd j mod m; for odd m all reflections are
    conjugate so both must agree.
    """
    if k_odd is None:
        k_odd = k_even
    m = int(m)
    k_even, k_odd = float(k_even), float(k_odd)
    if m < 3:
        raise InvalidParameterError(f"dihedral systems need m >= 3, got {m}")
    if not (k_even > 0 and k_odd > 0):
        raise InvalidParameterError("multiplicities must be positive")
    if m % 2 == 1 and k_even != k_odd:
        raise InvalidParameterError(
            f"odd m={m} has a single conjugacy class of reflections; k_even must equal k_odd")
    j = np.arange(2 * m)
    ang = np.pi * j / m
    roots = SQRT2 * np.stack([np.sin(ang), np.cos(ang)], axis=1)
    mult = np.where((j % m) % 2 == 0, k_even, k_odd)
    rs = RootSystem(_frozen(roots), tuple(range(m)), _frozen(mult), "dihedral",
                    {"m": m, "k_even": k_even, "k_odd": k_odd})
    validate_root_system(rs)
    return rs


def _root_index(rs: RootSystem, v, tol=1e-9):
    dist = np.linalg.norm(rs.roots - v, axis=1)
    i = int(np.argmin(dist))
    return i if dist[i] < tol else None


def validate_root_system(rs: RootSystem) -> None:
    """Check normalization, the +-alpha structure, closure and G-invariance of k."""
    R = rs.roots
    norms = np.linalg.norm(R, axis=1)
    if np.any(np.abs(norms - SQRT2) > 1e-12):
        raise InvalidParameterError("every root must have norm sqrt(2)")
    if np.any(rs.mult <= 0):
        raise InvalidParameterError("multiplicities must be positive")
    for i, a in enumerate(R):
        # exactly +-alpha on the line R alpha
        cos = R @ a / 2.0
        on_line = np.flatnonzero(np.abs(np.abs(cos) - 1.0) < 1e-12)
        if sorted(np.round(cos[on_line]).astype(int)) != [-1, 1]:
            raise InvalidParameterError(f"root {i}: R must meet the line R*alpha in exactly +-alpha")
        for b_idx, b in enumerate(R):
            img = reflect(rs, i, b)
            j = _root_index(rs, img)
            if j is None:
                raise InvalidParameterError(f"R is not closed under the reflection in root {i}")
            if abs(rs.mult[j] - rs.mult[b_idx]) > 1e-12:
                raise InvalidParameterError("multiplicity function is not G-invariant")
    pos = list(rs.positive)
    neg = [_root_index(rs, -R[i]) for i in pos]
    if sorted(pos + neg) != list(range(len(R))):
        raise InvalidParameterError("positive subsystem must satisfy R = R+ u (-R+)")


def reflection_matrix(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    return np.eye(alpha.size) - 2.0 * np.outer(alpha, alpha) / (alpha @ alpha)


def reflect(rs: RootSystem, root_index: int, x) -> np.ndarray:
    """sigma_alpha(x) = x - 2 <x, alpha> / |alpha|^2 alpha.  Works on (..., N) arrays."""
    alpha = rs.roots[root_index]
    x = np.asarray(x, dtype=float)
    return x - (2.0 * (x @ alpha) / (alpha @ alpha))[..., None] * alpha


@dataclass(frozen=True)
class ReflectionGroup:
    """Finite group generated by the root reflections.

    ``elements`` has shape (|G|, N, N) with the identity at index 0.
    ``cayley[g, a]`` is the index of sigma_{alpha_a} o g.
    """

    elements: np.ndarray
    cayley: np.ndarray
    identity_index: int = 0

    @property
    def order(self) -> int:
        return self.elements.shape[0]

    def index_of(self, matrix, tol=GROUP_TOL):
        d = np.linalg.norm(self.elements - matrix, axis=(1, 2))
        i = int(np.argmin(d))
        return i if d[i] < tol else None

    def compose(self, g: int, h: int) -> int:
        """Index of elements[g] @ elements[h]."""
        return self.index_of(self.elements[g] @ self.elements[h])

    def inverse(self, g: int) -> int:
        return self.index_of(self.elements[g].T)

    def orbit(self, y) -> np.ndarray:
        """All points g(y), shape (|G|, N) (or (..., |G|, N) for stacked y)."""
        y = np.asarray(y, dtype=float)
        return np.einsum("gij,...j->...gi", self.elements, y)

    def word_element(self, root_indices) -> int:
        """Element sigma_{a_m} o ... o sigma_{a_1} for the word (a_1, ..., a_m)."""
        g = self.identity_index
        for a in root_indices:
            g = int(self.cayley[g, a])
        return g


def generate_group(rs: RootSystem, cap: int = DEFAULT_GROUP_CAP) -> ReflectionGroup:
    """Breadth-first closure of the root reflections under composition."""
    gens = [reflection_matrix(a) for a in rs.roots]
    N = rs.dim
    elements = [np.eye(N)]
    buckets = {}

    def key(M):
        return tuple(np.round(M, 6).ravel() + 0.0)

    def lookup(M):
        for i in buckets.get(key(M), ()):
            if np.linalg.norm(elements[i] - M) < GROUP_TOL:
                return i
        # rounding can split near-equal matrices across buckets
        for i, E in enumerate(elements):
            if np.linalg.norm(E - M) < GROUP_TOL:
                return i
        return None

    buckets[key(elements[0])] = [0]
    cayley_rows = {}
    queue = deque([0])
    while queue:
        g = queue.popleft()
        row = []
        for S in gens:
            M = S @ elements[g]
            i = lookup(M)
            if i is None:
                if len(elements) >= cap:
                    raise NonFiniteGroupError(
                        f"group closure exceeded {cap} elements; root system is malformed")
                i = len(elements)
                elements.append(M)
                buckets.setdefault(key(M), []).append(i)
                queue.append(i)
            row.append(i)
        cayley_rows[g] = row
    cayley = np.array([cayley_rows[g] for g in range(len(elements))], dtype=np.int64)
    E = np.array(elements)
    E.setflags(write=False)
    cayley.setflags(write=False)
    return ReflectionGroup(E, cayley, 0)


def _tol(x, y, chamber_tol):
    return chamber_tol * (1.0 + np.linalg.norm(x, axis=-1) + np.linalg.norm(y, axis=-1))


def orbit_distances(grp: ReflectionGroup, x, y) -> np.ndarray:
    """|x - g(y)| for every element g; shape (..., |G|) for stacked x, y."""
    x = np.asarray(x, dtype=float)
    orb = grp.orbit(y)
    return np.linalg.norm(x[..., None, :] - orb, axis=-1)


def orbit_distance(rs: RootSystem, grp: ReflectionGroup, x, y):
    """d(x, y) = min_g |x - g(y)| and the lowest-index minimizing element."""
    dist = orbit_distances(grp, x, y)
    g = int(np.argmin(dist))
    return float(dist[g]), g


def chamber_mask(grp: ReflectionGroup, x, y, chamber_tol=CHAMBER_TOL) -> np.ndarray:
    """Boolean (..., |G|): True where g(y) lies in the closed chamber of x.

    Uses the characterization |x - g(y)| = d(x, y).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = orbit_distances(grp, x, y)
    d = dist.min(axis=-1, keepdims=True)
    return dist <= d + _tol(x, y, chamber_tol)[..., None]


def reflection_count(rs: RootSystem, grp: ReflectionGroup, x, y, chamber_tol=CHAMBER_TOL) -> int:
    """n(x, y): fewest reflections moving y into the closed chamber of x.

    Breadth-first search on the Cayley graph from the identity; goal
    elements are those g with |x - g(y)| = d(x, y).
    """
    goal = chamber_mask(grp, x, y, chamber_tol)
    return int(_bfs_levels(rs, grp)[goal].min())


def _bfs_levels(rs: RootSystem, grp: ReflectionGroup) -> np.ndarray:
    """Word length of every element in terms of reflections."""
    level = np.full(grp.order, -1, dtype=np.int64)
    level[grp.identity_index] = 0
    frontier = [grp.identity_index]
    depth = 0
    while frontier:
        depth += 1
        nxt = []
        for g in frontier:
            for a in rs.positive:
                h = int(grp.cayley[g, a])
                if level[h] < 0:
                    level[h] = depth
                    nxt.append(h)
        frontier = nxt
    return level


def reflection_counts(rs: RootSystem, grp: ReflectionGroup, X, Y, chamber_tol=CHAMBER_TOL) -> np.ndarray:
    """Vectorized n(x, y) over stacked points X, Y of shape (P, N)."""
    goal = chamber_mask(grp, X, Y, chamber_tol)
    lv = _bfs_levels(rs, grp).astype(float)
    return np.where(goal, lv, np.inf).min(axis=-1).astype(np.int64)


@dataclass(frozen=True)
class OrbitGeometry:
    x: np.ndarray
    y: np.ndarray
    orbit_points: np.ndarray
    d: float
    n: int
    argmin: int
    on_wall: bool
    chamber_tol: float = CHAMBER_TOL


def orbit_geometry(rs: RootSystem, grp: ReflectionGroup, x, y, chamber_tol=CHAMBER_TOL) -> OrbitGeometry:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d, g = orbit_distance(rs, grp, x, y)
    n = reflection_count(rs, grp, x, y, chamber_tol)
    return OrbitGeometry(x, y, grp.orbit(y), d, n, g,
                         near_wall(rs, x, chamber_tol) or near_wall(rs, y, chamber_tol),
                         chamber_tol)


def near_wall(rs: RootSystem, x, chamber_tol=CHAMBER_TOL) -> bool:
    """True if x lies within chamber_tol (1 + |x|) of some reflecting hyperplane."""
    x = np.asarray(x, dtype=float)
    dist = np.abs(rs.positive_roots @ x) / SQRT2
    return bool(np.any(dist <= chamber_tol * (1.0 + np.linalg.norm(x))))


def shortening_sequence(rs: RootSystem, grp: ReflectionGroup, x, y, chamber_tol=CHAMBER_TOL) -> list:
    """Positive-root word strictly decreasing |x - (current point)| until y reaches x's chamber.

    At each step the root with the largest decrease is taken; exact ties
    go to the lowest root index.  Empty iff n(x, y) = 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = orbit_distances(grp, x, y)
    tol = float(_tol(x, y, chamber_tol))
    d = dist.min()
    g = grp.identity_index
    word = []
    while dist[g] > d + tol:
        best, best_dec = None, tol
        for a in rs.positive:
            dec = dist[g] - dist[grp.cayley[g, a]]
            if dec > best_dec:
                best, best_dec = a, dec
        if best is None or len(word) >= grp.order:
            raise AssertionError("shortening sequence failed to terminate; no decreasing reflection")
        word.append(int(best))
        g = int(grp.cayley[g, best])
    return word
