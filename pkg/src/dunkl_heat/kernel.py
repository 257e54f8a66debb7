"""Exact Dunkl heat kernels for rank one and for products Z_2^N.

Rank one uses R = {+-sqrt(2)} with multiplicity k, so w(x) = 2^k |x|^(2k),
c_k = 2^(2k+1/2) Gamma(k+1/2) and the homogeneous dimension is 1 + 2k.
The Dunkl kernel is realized two ways:

* the intertwining integral E_k(x, y) = E[exp(x y s)] for s distributed
  as (1-s)^(k-1) (1+s)^k on [-1, 1] (Gauss-Jacobi quadrature), which is
  also the rank-one Roesler measure after the substitution eta = x s;
* the closed form Gamma(k+1/2) (z/2)^(1/2-k) [I_(k-1/2)(z) + I_(k+1/2)(z)],
  z = x y, evaluated with exponentially scaled Bessel functions.

Everything that can underflow is carried in log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import betaln, gammaln, ive, roots_genlaguerre, roots_jacobi

from .errors import DomainError, InvalidParameterError, PrecisionError, WallProximityError
from .rootsys import RootSystem, build_product_A1, reflect

DEFAULT_ORDER = 64
MAX_ORDER = 512
# scipy Jacobi rules lose a few digits past ~128 nodes, so agreement is asked to 1e-8
QUAD_RTOL = 1e-8
# above this |x y / 2t| the Roesler integrand lives in an O(1/|z|) layer at an endpoint
LAGUERRE_SWITCH = 40.0


def _check_k(k):
    if not k > 0:
        raise InvalidParameterError(f"multiplicity must be positive, got {k}")


def _check_t(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError("t must be positive")


def log_ck_rank1(k: float) -> float:
    """log c_k for rank one: c_k = 2^(2k+1/2) Gamma(k+1/2)."""
    return (2 * k + 0.5) * np.log(2.0) + gammaln(k + 0.5)


def ck_quadrature_rank1(k: float) -> float:
    """c_k from its definition: integral of exp(-x^2/2) 2^k |x|^(2k) over the line."""
    val, _ = integrate.quad(lambda x: 2.0**k * x ** (2 * k) * np.exp(-x * x / 2), 0.0, np.inf,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return 2.0 * val


def log_norm_nu(k: float) -> float:
    """log of the mass of (1-s)^(k-1) (1+s)^k on [-1, 1], i.e. 2^(2k) B(k, k+1)."""
    return 2 * k * np.log(2.0) + betaln(k, k + 1)


@lru_cache(maxsize=64)
def gauss_jacobi_rule(k: float, order: int):
    """Nodes and normalized weights for the probability density prop. to (1-s)^(k-1) (1+s)^k."""
    s, w = roots_jacobi(order, k - 1.0, k)
    w = w / w.sum()
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


@lru_cache(maxsize=64)
def _laguerre_rule(alpha: float, order: int):
    v, w = roots_genlaguerre(order, alpha)
    v.setflags(write=False)
    w.setflags(write=False)
    return v, w


@dataclass(frozen=True)
class Rank1Kernel:
    """Quadrature data and normalization for the rank-one Dunkl heat kernel."""

    k: float
    order: int = DEFAULT_ORDER
    nodes: np.ndarray = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)
    ck: float = 0.0

    @classmethod
    def build(cls, k: float, order: int = DEFAULT_ORDER) -> "Rank1Kernel":
        _check_k(k)
        ck = float(np.exp(log_ck_rank1(k)))
        ck_q = ck_quadrature_rank1(k)
        if abs(ck_q - ck) > 1e-8 * ck:
            raise PrecisionError(f"c_k mismatch: closed form {ck!r} vs quadrature {ck_q!r}")
        s, w = gauss_jacobi_rule(float(k), order)
        return cls(float(k), order, s, w, ck)

    @property
    def homogeneous_dim(self) -> float:
        return 1.0 + 2.0 * self.k

    def heat(self, x, y, t):
        return heat_kernel_1d(self.k, x, y, t)

    def rosler(self, x, y, t):
        return rosler_eval_1d(self.k, x, y, t)


# ---------------------------------------------------------------------------
# Dunkl kernel E_k


def _jacobi_escalate(k, fn, order=DEFAULT_ORDER, rtol=QUAD_RTOL):
    """E[fn(s)] under the normalized Jacobi density, doubling the order until two agree."""
    s, w = gauss_jacobi_rule(float(k), order)
    prev = w @ fn(s)
    n = order
    while n < MAX_ORDER:
        n *= 2
        s, w = gauss_jacobi_rule(float(k), n)
        cur = w @ fn(s)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise PrecisionError(f"Gauss-Jacobi quadrature did not converge by {MAX_ORDER} nodes")


def dunkl_kernel_1d(k: float, x: float, y: float, order: int = DEFAULT_ORDER) -> float:
    """E_k(x, y) via the intertwining integral (Gauss-Jacobi, Gauss-Laguerre for large |x y|)."""
    _check_k(k)
    z = float(x) * float(y)
    if z == 0.0:
        return 1.0
    # scale out exp(|z|) so every quadrature term is <= 1
    return float(np.exp(_log_scaled_nu(k, z, 0.0, 0, order) + abs(z)))


def log_dunkl_kernel_1d_bessel(k: float, z) -> np.ndarray:
    """log E_k at product z = x y, from the modified Bessel closed form."""
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    out = np.zeros_like(az)
    small = az < 1e-5
    big = ~small
    if np.any(small):
        zs = z[small]
        out[small] = np.log1p(zs / (2 * k + 1) + zs**2 / (2 * (2 * k + 1)))
    if np.any(big):
        a = az[big]
        sgn = np.sign(z[big])
        bracket = ive(k - 0.5, a) + sgn * ive(k + 0.5, a)
        out[big] = gammaln(k + 0.5) + (0.5 - k) * np.log(a / 2) + np.log(bracket) + a
    return out


def dunkl_kernel_1d_bessel(k: float, x, y):
    return np.exp(log_dunkl_kernel_1d_bessel(k, np.asarray(x, float) * np.asarray(y, float)))


def dunkl_operator_1d(k: float, f, x: float, h: float = 1e-4) -> float:
    """Rank-one Dunkl operator T f(x) = f'(x) + k (f(x) - f(-x)) / x (central difference for f')."""
    if x == 0:
        raise WallProximityError("rank-one Dunkl operator evaluated on the wall x = 0")
    return (f(x + h) - f(x - h)) / (2 * h) + k * (f(x) - f(-x)) / x


# ---------------------------------------------------------------------------
# Heat kernel: closed form


def log_heat_kernel_1d(k: float, x, y, t) -> np.ndarray:
    """log h_t(x, y) = -log c_k - (N/2) log(2t) + log E(x/sqrt(2t), y/sqrt(2t)) - (x^2+y^2)/4t."""
    _check_k(k)
    _check_t(t)
    x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
    Nh = 1.0 + 2.0 * k
    z = x * y / (2.0 * t)
    return (-log_ck_rank1(k) - 0.5 * Nh * np.log(2.0 * t)
            + log_dunkl_kernel_1d_bessel(k, z) - (x * x + y * y) / (4.0 * t))


def heat_kernel_1d(k: float, x, y, t):
    """Rank-one Dunkl heat kernel h_t(x, y) with respect to dw = 2^k |x|^(2k) dx."""
    out = np.exp(log_heat_kernel_1d(k, x, y, t))
    return float(out) if out.ndim == 0 else out


def log_heat_kernel_product(ks, X, Y, T) -> np.ndarray:
    """log of prod_i h_t^(k_i)(x_i, y_i); X, Y of shape (..., N)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    T = np.asarray(T, dtype=float)
    ks = list(np.atleast_1d(ks))
    if X.shape[-1] != len(ks) or Y.shape[-1] != len(ks):
        raise InvalidParameterError("dimension of points must match the number of multiplicities")
    return sum(log_heat_kernel_1d(k, X[..., i], Y[..., i], T) for i, k in enumerate(ks))


def heat_kernel_product(ks, x, y, t):
    out = np.exp(log_heat_kernel_product(ks, x, y, t))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Roesler representation (rank one)


def rosler_density_1d(k: float, x: float, eta):
    """Density of mu_x on [-|x|, |x|] (x != 0): (1/|x|) nu(eta/x), nu prop. to (1-s)^(k-1)(1+s)^k."""
    _check_k(k)
    if x == 0:
        raise DomainError("mu_0 is the point mass at 0 and has no density")
    s = np.asarray(eta, dtype=float) / x
    inside = np.abs(s) < 1.0
    sc = np.where(inside, s, 0.0)
    dens = np.exp((k - 1) * np.log1p(-sc) + k * np.log1p(sc) - log_norm_nu(k)) / abs(x)
    return np.where(inside, dens, 0.0)


def A_squared(x, y, eta):
    """A(x, y, eta)^2 = |x|^2 + |y|^2 - 2 <y, eta>."""
    x, y, eta = (np.asarray(v, dtype=float) for v in (x, y, eta))
    return np.sum(x * x, -1) + np.sum(y * y, -1) - 2 * np.sum(y * eta, -1)


def A_squared_alt(x, y, eta):
    """Equivalent form |x|^2 - |eta|^2 + |y - eta|^2."""
    x, y, eta = (np.asarray(v, dtype=float) for v in (x, y, eta))
    return np.sum(x * x, -1) - np.sum(eta * eta, -1) + np.sum((y - eta) ** 2, -1)


def _log_scaled_nu(k: float, z: float, D: float, power: int, order: int = DEFAULT_ORDER) -> float:
    """log of E[exp(-v) (D + v)^power], v = |z| (1 - sign(z) s), s ~ nu_k.

    Small |z| uses Gauss-Jacobi; for large |z| the integrand lives in an
    O(1/|z|) layer at one endpoint and generalized Gauss-Laguerre in v is used.
    """
    az = abs(z)
    if az == 0.0:
        return power * np.log(D) if power else 0.0
    sgn = 1.0 if z > 0 else -1.0
    if az <= LAGUERRE_SWITCH:
        J = _jacobi_escalate(k, lambda s: np.exp(-az * (1.0 - sgn * s)) * (D + az * (1.0 - sgn * s)) ** power,
                             order)
        return float(np.log(J))
    # endpoint layer: Gauss-Laguerre in v, exp(-v) v^alpha weight
    if sgn > 0:
        alpha, lead = k - 1.0, -k * np.log(az)

        def f(v):
            return np.where(v < 2 * az, np.clip(2.0 - v / az, 0.0, None) ** k, 0.0)
    else:
        alpha, lead = k, -(k + 1.0) * np.log(az)

        def f(v):
            inside = v < 2 * az
            base = np.where(inside, 2.0 - v / az, 1.0)
            return np.where(inside, base ** (k - 1.0), 0.0)

    def quad(n):
        v, w = _laguerre_rule(float(alpha), n)
        return w @ (f(v) * (D + v) ** power)

    n = order
    prev = quad(n)
    while True:
        n *= 2
        if n > MAX_ORDER:
            raise PrecisionError(f"Gauss-Laguerre endpoint rule did not converge by {MAX_ORDER} nodes")
        cur = quad(n)
        if abs(cur - prev) <= QUAD_RTOL * abs(cur):
            break
        prev = cur
    return float(np.log(cur) + lead - log_norm_nu(k))


def _log_mu_moment(k, x, y, t, power, order=DEFAULT_ORDER):
    """log J with  int (A^2/4t)^power exp(-A^2/4t) dmu_x = exp(-D) J,  D = (|x| - |y|)^2 / 4t.

    With eta = x s the exponent splits as A^2/4t = D + v, v = |z| (1 - sign(z) s),
    z = x y / 2t, so the remaining integrand is bounded by (D + v)^power.
    """
    D = (abs(x) - abs(y)) ** 2 / (4.0 * t)
    return _log_scaled_nu(k, x * y / (2.0 * t), D, power, order)


def log_rosler_eval_1d(k: float, x: float, y: float, t: float, order: int = DEFAULT_ORDER) -> float:
    _check_k(k)
    _check_t(t)
    D = (abs(x) - abs(y)) ** 2 / (4.0 * t)
    Nh = 1.0 + 2.0 * k
    return (-log_ck_rank1(k) - 0.5 * Nh * np.log(2.0 * t) - D
            + _log_mu_moment(k, float(x), float(y), float(t), 0, order))


def rosler_eval_1d(k: float, x: float, y: float, t: float, order: int = DEFAULT_ORDER) -> float:
    """h_t(x, y) = c_k^-1 (2t)^(-N/2) int exp(-A(x,y,eta)^2 / 4t) dmu_x(eta), by quadrature over mu_x.

    x = 0 is covered by mu_0 = delta_0 (then z = 0 and the integral is exp(-y^2/4t)).
    """
    return float(np.exp(log_rosler_eval_1d(k, x, y, t, order)))


def I2_rank1(k: float, x: float, y: float, t: float) -> float:
    """c_k^-1 2^(-N/2) t^(-1-N/2) int (A^2/4t) exp(-A^2/4t) dmu_x, by quadrature."""
    _check_t(t)
    D = (abs(x) - abs(y)) ** 2 / (4.0 * t)
    Nh = 1.0 + 2.0 * k
    logJ = _log_mu_moment(k, float(x), float(y), float(t), 1)
    return float(np.exp(-log_ck_rank1(k) - 0.5 * Nh * np.log(2.0 * t) - D + logJ) / t)


# ---------------------------------------------------------------------------
# Kernel evaluators with a uniform interface


class ProductKernel:
    """Closed-form heat kernel of the product system with multiplicities ks (rank one if len 1)."""

    backend = "closed-form-product"

    def __init__(self, ks):
        self.ks = [float(k) for k in np.atleast_1d(ks)]
        self.rs = build_product_A1(len(self.ks), self.ks)

    def log_h(self, X, Y, T):
        return log_heat_kernel_product(self.ks, X, Y, T)

    def h(self, x, y, t):
        out = np.exp(self.log_h(x, y, t))
        return float(out) if out.ndim == 0 else out


class RoslerRank1Kernel:
    """Rank-one heat kernel from the Roesler integral (scalar evaluation)."""

    backend = "rosler-rank1"

    def __init__(self, k):
        self.k = float(k)
        self.ks = [self.k]
        self.rs = build_product_A1(1, [self.k])

    def log_h(self, X, Y, T):
        X, Y, T = np.broadcast_arrays(np.asarray(X, float)[..., 0], np.asarray(Y, float)[..., 0],
                                      np.asarray(T, float))
        out = np.vectorize(lambda a, b, c: log_rosler_eval_1d(self.k, a, b, c))(X, Y, T)
        return np.asarray(out, dtype=float)

    def h(self, x, y, t):
        out = np.exp(self.log_h(x, y, t))
        return float(out) if out.ndim == 0 else out


def _orbit_sum(kernel, x, y, t):
    """sum_{alpha in R} k(alpha) h_t(x, sigma_alpha y)."""
    rs = kernel.rs
    return sum(rs.mult[a] * kernel.h(x, reflect(rs, a, y), t) for a in range(rs.n_roots))


def check_time_derivative(kernel, x, y, t, rel_step: float = 1e-2, relative: bool = False) -> float:
    """|d/dt h - RHS| for  d/dt h = |x-y|^2/(2t)^2 h - N/(2t) h - 1/(2t) sum_R k h(x, sigma y).

    The time derivative is a five-point central difference.  Its step is
    rel_step * t / (1 + |x-y|^2/4t + N), since h varies on that time scale.
    With relative=True the residual is divided by the sum of |terms| on the right.
    """
    _check_t(t)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    N = kernel.rs.dim
    scale = 1.0 + np.sum((x - y) ** 2) / (4 * t) + N
    dt = t * rel_step / scale
    f = [kernel.h(x, y, t + j * dt) for j in (-2, -1, 1, 2)]
    lhs = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * dt)
    h = kernel.h(x, y, t)
    terms = (np.sum((x - y) ** 2) / (2 * t) ** 2 * h, N / (2 * t) * h, _orbit_sum(kernel, x, y, t) / (2 * t))
    res = abs(lhs - (terms[0] - terms[1] - terms[2]))
    if relative:
        # the orbit terms can exceed h itself, so normalize by the size of the pieces
        res /= sum(abs(v) for v in terms)
    return float(res)


def check_basic_identity(k: float, x: float, y: float, t: float):
    """Both sides of (2N_h - 2N + |x-y|^2/t) h = 4t I_2 + 2 sum_R k h(x, sigma y) in rank one.

    Returns (residual, lhs, rhs); I_2 comes from quadrature against mu_x.
    """
    _check_t(t)
    Nh = 1.0 + 2.0 * k
    h = heat_kernel_1d(k, x, y, t)
    lhs = (2 * Nh - 2 + (x - y) ** 2 / t) * h
    rhs = 4 * t * I2_rank1(k, x, y, t) + 2 * (2 * k) * heat_kernel_1d(k, x, -y, t)
    return float(abs(lhs - rhs)), float(lhs), float(rhs)


def mu_measure_U(k: float, x: float, sigma: int, t: float) -> float:
    """mu_x(U(sigma x, t)) in rank one, sigma = +1 (identity) or -1 (the reflection).

    U(y, t) = {eta in [-|x|, |x|] : y^2 - y eta <= t}.  In s = eta/x this is
    s >= 1 - t/x^2 for sigma = +1 and s <= -1 + t/x^2 for sigma = -1.
    """
    _check_k(k)
    _check_t(t)
    if sigma not in (1, -1):
        raise InvalidParameterError("sigma must be +1 or -1 in rank one")
    if x == 0:
        return 1.0
    u = t / (x * x)
    lognorm = log_norm_nu(k)
    if u >= 2.0:
        return 1.0
    if sigma == 1:
        lo = 1.0 - u
        val, _ = integrate.quad(lambda s: (1 + s) ** k, lo, 1.0, weight="alg", wvar=(0.0, k - 1.0),
                                epsabs=0.0, epsrel=1e-12, limit=200)
    else:
        hi = -1.0 + u
        val, _ = integrate.quad(lambda s: (1 - s) ** (k - 1.0), -1.0, hi, weight="alg", wvar=(k, 0.0),
                                epsabs=0.0, epsrel=1e-12, limit=200)
    return float(min(1.0, val * np.exp(-lognorm)))


def dunkl_laplacian_apply(rs: RootSystem, f, x, h: float = 1e-3) -> float:
    """Delta_k f(x) = Delta f + sum_R k(alpha) [d_alpha f / <alpha,x> - (|alpha|^2/2)(f(x) - f(sigma x))/<alpha,x>^2].

    f is a callable sampled on the stencil x +- h e_i, x +- h alpha/|alpha| and the
    reflected points sigma_alpha(x); x must stay at least h/2 away from every wall.
    """
    x = np.asarray(x, dtype=float)
    N = rs.dim
    dist = np.abs(rs.roots @ x) / np.linalg.norm(rs.roots, axis=1)
    if np.any(dist < h / 2):
        raise WallProximityError(f"x is within half a stencil width of a wall (min distance {dist.min():.3g})")
    fx = f(x)
    lap = 0.0
    for i in range(N):
        e = np.zeros(N)
        e[i] = h
        lap += (f(x + e) - 2 * fx + f(x - e)) / h**2
    for a, alpha in enumerate(rs.roots):
        na2 = alpha @ alpha
        u = alpha / np.sqrt(na2)
        d_alpha = np.sqrt(na2) * (f(x + h * u) - f(x - h * u)) / (2 * h)
        ax = alpha @ x
        lap += rs.mult[a] * (d_alpha / ax - 0.5 * na2 * (fx - f(reflect(rs, a, x))) / ax**2)
    return float(lap)
