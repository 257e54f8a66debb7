"""Sweeps that measure the constants in the heat kernel bounds, and their reports.

The bounds are existence statements, so a sweep cannot prove them.  A family
of ratios passes when every ratio is finite and the extremal ratio does not
keep growing across the largest values of s = |x - y|^2 / t (see trend_test).
All ratios are kept in log space.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import bounds, kernel, pde
from .errors import ConfigurationError
from .rootsys import (CHAMBER_TOL, RootSystem, generate_group, orbit_distances, reflect,
                      reflection_counts)

LOG2 = float(np.log(2.0))

DEFAULT_T = {"low": -2.0, "high": 2.0, "num": 17}
RANK1_KS = (0.5, 1.0, 2.3)


# ---------------------------------------------------------------------------
# configuration


def _points(spec, dim, rng) -> np.ndarray:
    """Points from {"grid": {low, high, num}}, {"random": {low, high, n}} or {"list": [...]}."""
    if "list" in spec:
        pts = np.asarray(spec["list"], dtype=float)
        return pts.reshape(-1, dim)
    if "grid" in spec:
        g = spec["grid"]
        axis = np.linspace(g["low"], g["high"], int(g["num"]))
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    if "random" in spec:
        r = spec["random"]
        return rng.uniform(r["low"], r["high"], size=(int(r["n"]), dim))
    raise ConfigurationError(f"point spec needs one of list/grid/random, got {sorted(spec)}")


def _times(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.logspace(spec["low"], spec["high"], int(spec["num"]))
    return np.asarray(spec, dtype=float)


@dataclass
class SweepConfig:
    """Everything a suite needs; c_u < 1/4 < c_l is enforced on construction."""

    system: dict = field(default_factory=lambda: {"family": "product_a1", "N": 1, "k": [1.0]})
    backend: str = "closed-form"
    x: dict = field(default_factory=lambda: {"grid": {"low": -10.0, "high": 10.0, "num": 41}})
    y: dict = field(default_factory=lambda: {"grid": {"low": -10.0, "high": 10.0, "num": 41}})
    t: object = field(default_factory=lambda: dict(DEFAULT_T))
    c_u: float = 0.2
    c_l: float = 0.3
    c_1: float = 0.15
    max_s: float = 400.0
    seed: int = 0
    out: str | None = None
    jobs: int = 1
    tolerances: dict = field(default_factory=dict)
    pde: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.c_u < 0.25:
            raise ConfigurationError(f"c_u must lie in (0, 1/4), got {self.c_u}")
        if not self.c_l > 0.25:
            raise ConfigurationError(f"c_l must exceed 1/4, got {self.c_l}")
        if not 0 < self.c_1 < self.c_u:
            raise ConfigurationError(f"c_1 must lie in (0, c_u), got {self.c_1}")
        if self.backend not in ("closed-form", "pde"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def root_system(self) -> RootSystem:
        return RootSystem.from_config(self.system)

    def to_dict(self) -> dict:
        return asdict(self)


def default_product2_config(**kw) -> SweepConfig:
    """Z_2^2, k = (1, 1): 40 x 40 random pairs in [-5, 5]^2 over the default times."""
    base = dict(system={"family": "product_a1", "N": 2, "k": [1.0, 1.0]},
                x={"random": {"low": -5.0, "high": 5.0, "n": 40}},
                y={"random": {"low": -5.0, "high": 5.0, "n": 40}})
    base.update(kw)
    return SweepConfig(**base)


def default_dihedral_pde_config(**kw) -> SweepConfig:
    """Dihedral m=3, k=1 on the grid backend, one source off the walls, t = 0.5."""
    x0 = 2.0 * np.array([np.cos(np.pi / 6), np.sin(np.pi / 6)])
    base = dict(system={"family": "dihedral", "m": 3, "k_even": 1.0},
                backend="pde", x={"list": [x0.tolist()]}, y={"list": []}, t=[0.5],
                pde={"q": 1, "n_r": 60, "R_max": 7.0, "t_init": 0.02, "band_max": 10.0})
    base.update(kw)
    return SweepConfig(**base)


# ---------------------------------------------------------------------------
# pass criterion


def trend_test(s, log_ratio, direction: int, tol: float = LOG2):
    """Doubling trend test on the extremal ratio over the top decile of s.

    The top decile (s >= q90) is compared with the window q90/2 <= s < q90.
    direction=+1 guards a sup (upper bounds): fail when the top-decile max
    exceeds the window max by more than tol.  direction=-1 guards an inf.
    Returns (passed, excess).
    """
    s = np.asarray(s, dtype=float)
    r = np.asarray(log_ratio, dtype=float)
    if s.size == 0:
        return True, 0.0
    q90 = float(np.quantile(s, 0.9))
    top = s >= q90
    win = (s >= q90 / 2) & (s < q90)
    if q90 <= 0 or not top.any() or not win.any():
        return True, 0.0
    if direction > 0:
        excess = float(r[top].max() - r[win].max())
    else:
        excess = float(r[win].min() - r[top].min())
    return bool(excess <= tol), excess


# ---------------------------------------------------------------------------
# report


@dataclass
class EnvelopeReport:
    """Per-point log ratios plus the measured constants.

    Ĉ_u = exp(sup upper_ratio) and Ĉ_l = exp(inf lower_ratio); both must be
    finite and positive for a pass.
    """

    columns: dict
    summary: dict
    flags: dict

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def write_csv(self, path):
        write_columns(path, self.columns)


def write_columns(path, columns: dict):
    """CSV with one row per point; floats in repr form so reruns are byte-identical."""
    names = list(columns)
    n = len(next(iter(columns.values()))) if columns else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(columns[c][i]) for c in names])


def _fmt(v):
    if isinstance(v, (str, bool, np.bool_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _split_xyz(prefix, arr):
    return {f"{prefix}{i}": arr[:, i] for i in range(arr.shape[1])}


def _on_wall(rs: RootSystem, P) -> np.ndarray:
    dist = np.abs(P @ rs.positive_roots.T) / np.sqrt(2.0)
    return np.any(dist <= CHAMBER_TOL * (1.0 + np.linalg.norm(P, axis=1))[:, None], axis=1)


def envelope_report(rs: RootSystem, grp, X, Y, T, log_h, c_u: float, c_l: float,
                    lambda_mode: str = "dp", trend: bool = True) -> EnvelopeReport:
    """Sandwich ratios log[h / (V^-1 e^(-c d^2/t) Lambda)] at c = c_u (upper) and c = c_l (lower)."""
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    T = np.broadcast_to(np.asarray(T, dtype=float), (X.shape[0],))
    if lambda_mode == "dp":
        lam = bounds.lambda_dp_batch(rs, grp, X, Y, T)
    else:
        lam = bounds.lambda_dihedral_batch(rs, grp, X, Y, T)
    d = orbit_distances(grp, X, Y).min(axis=1)
    n = reflection_counts(rs, grp, X, Y)
    logV = bounds.log_volume_comparable(rs, X, np.sqrt(T))
    base = -logV + np.log(lam)
    upper = log_h - (base - c_u * d**2 / T)
    lower = log_h - (base - c_l * d**2 / T)
    s = np.sum((X - Y) ** 2, axis=1) / T
    # n(x, y) is ambiguous when x or y sits on a wall; such rows are kept but marked
    on_wall = _on_wall(rs, X) | _on_wall(rs, Y)
    cols = {**_split_xyz("x", X), **_split_xyz("y", Y), "t": T, "log_h": log_h, "d": d, "n": n,
            "log_lambda": np.log(lam), "log_V": logV, "lower_ratio": lower, "upper_ratio": upper,
            "on_wall": on_wall.astype(int)}
    finite = bool(np.all(np.isfinite(upper)) and np.all(np.isfinite(lower)))
    summary = {"points": int(X.shape[0]), "wall_points": int(on_wall.sum())}
    flags = {"finite": finite}
    if X.shape[0]:
        summary.update(C_u=float(np.exp(upper.max())), C_l=float(np.exp(lower.min())),
                       log_band=float(upper.max() - lower.min()),
                       upper_quantiles=[float(v) for v in np.quantile(upper, [0.1, 0.5, 0.9])],
                       lower_quantiles=[float(v) for v in np.quantile(lower, [0.1, 0.5, 0.9])])
        flags["positive_C_l"] = bool(np.exp(lower.min()) > 0)
        if trend:
            ok_u, ex_u = trend_test(s, upper, +1)
            ok_l, ex_l = trend_test(s, lower, -1)
            summary.update(trend_upper=ex_u, trend_lower=ex_l)
            flags.update(trend_upper=ok_u, trend_lower=ok_l)
    return EnvelopeReport(cols, summary, flags)


# ---------------------------------------------------------------------------
# sweeps over the closed-form kernels


def _pairs(cfg: SweepConfig, dim: int):
    rng = np.random.default_rng(cfg.seed)
    xs = _points(cfg.x, dim, rng)
    ys = _points(cfg.y, dim, rng)
    ts = _times(cfg.t)
    ix, iy, it = np.meshgrid(np.arange(len(xs)), np.arange(len(ys)), np.arange(len(ts)), indexing="ij")
    X, Y, T = xs[ix.ravel()], ys[iy.ravel()], ts[it.ravel()]
    keep = np.sum((X - Y) ** 2, axis=1) / T <= cfg.max_s
    return X[keep], Y[keep], T[keep]


def _chunks(n, jobs):
    bounds_ = np.linspace(0, n, max(1, jobs) + 1).astype(int)
    return [(a, b) for a, b in zip(bounds_[:-1], bounds_[1:]) if b > a]


def _log_h_chunk(args):
    ks, X, Y, T = args
    return kernel.log_heat_kernel_product(ks, X, Y, T)


def _parallel(fn, tasks, jobs):
    """Ordered map; results are identical to the serial run whatever the job count."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def product_log_h(ks, X, Y, T, jobs=1) -> np.ndarray:
    parts = _parallel(_log_h_chunk, [(ks, X[a:b], Y[a:b], T[a:b]) for a, b in _chunks(len(X), jobs)],
                      jobs)
    return np.concatenate(parts) if parts else np.empty(0)


def _orbit_log_terms(rs: RootSystem, ks, X, Y, T):
    """log of k(alpha) h_t(x, sigma_alpha y) for every root, shape (P, |R|)."""
    out = np.empty((X.shape[0], rs.n_roots))
    for a in range(rs.n_roots):
        out[:, a] = np.log(rs.mult[a]) + kernel.log_heat_kernel_product(ks, X, reflect(rs, a, Y), T)
    return out


def _orbit_log_sum_unweighted(rs, ks, X, Y, T):
    """log sum_{alpha in R} h_t(x, sigma_alpha y)."""
    terms = np.stack([kernel.log_heat_kernel_product(ks, X, reflect(rs, a, Y), T)
                      for a in range(rs.n_roots)], axis=1)
    return logsumexp(terms, axis=1)


def run_verify_bounds(cfg: SweepConfig) -> EnvelopeReport:
    """Sandwich ratios for the two-sided bound over the configured sweep."""
    rs = cfg.root_system()
    grp = generate_group(rs)
    if cfg.backend == "pde":
        return _verify_bounds_pde(cfg, rs, grp)
    if rs.family != "product_a1":
        raise ConfigurationError("the closed-form backend covers product systems only; use backend 'pde'")
    X, Y, T = _pairs(cfg, rs.dim)
    log_h = product_log_h(rs.params["k"], X, Y, T, cfg.jobs)
    rep = envelope_report(rs, grp, X, Y, T, log_h, cfg.c_u, cfg.c_l)
    rep.summary["backend"] = "closed-form-product"
    return rep


def _verify_bounds_pde(cfg: SweepConfig, rs: RootSystem, grp) -> EnvelopeReport:
    """Grid kernel h_t(x0, .) at each configured source and time, over its resolvable region.

    The band is Ĉ_u / Ĉ_l, the width of the sandwich the measured kernel needs.
    """
    if rs.dim != 2:
        raise ConfigurationError("the grid backend is two-dimensional")
    p = {"q": 1, "n_r": 60, "R_max": 7.0, "t_init": 0.02, "band_max": 10.0, "max_solver_band": 0.25}
    p.update(cfg.pde)
    m = rs.params["m"] if rs.family == "dihedral" else 2
    if rs.family == "product_a1" and rs.dim != 2:
        raise ConfigurationError("product systems on the grid need N = 2")
    lambda_mode = "dihedral" if rs.family == "dihedral" else "dp"
    grid = pde.build_grid(m, int(p["q"]), int(p["n_r"]), float(p["R_max"]))
    solver = pde.HeatSolver(grid, pde.multiplicities_for(grid, rs))
    rng = np.random.default_rng(cfg.seed)
    sources = _points(cfg.x, 2, rng)
    cols, solver_bands = [], []
    for x0 in sources:
        for t in _times(cfg.t):
            ap = pde.approximate_kernel(solver, x0, float(t), float(p["t_init"]),
                                        max_band=float(p["max_solver_band"]))
            u = ap.state.u
            reg = u > pde.BAND_REGION * u.max()
            Y = solver.points[reg]
            X = np.broadcast_to(ap.x0, Y.shape)
            cols.append((X, Y, np.full(len(Y), float(t)), np.log(u[reg])))
            solver_bands.append(ap.band)
    X, Y, T, log_h = (np.concatenate([c[i] for c in cols]) for i in range(4))
    rep = envelope_report(rs, grp, X, Y, T, log_h, cfg.c_u, cfg.c_l, lambda_mode, trend=False)
    band = float(np.exp(rep.summary["log_band"]))
    rep.summary.update(backend="pde-grid", band=band, band_max=float(p["band_max"]),
                       solver_band=float(max(solver_bands)), lambda_mode=lambda_mode,
                       note="tolerance is solver-limited; the region is u > 1e-3 max u")
    rep.flags["band"] = bool(band <= float(p["band_max"]))
    return rep


# ---------------------------------------------------------------------------
# identities and auxiliary inequalities


def _rank1_identity_rows(k, xs, ts):
    """Derivative and basic identities on a small rank-one grid."""
    kern = kernel.ProductKernel([k])
    rows = []
    for x in xs:
        for y in xs:
            for t in ts:
                der = kernel.check_time_derivative(kern, [x], [y], t, relative=True)
                res, lhs, rhs = kernel.check_basic_identity(k, x, y, t)
                rows.append((k, x, y, t, der, res / max(abs(lhs), abs(rhs))))
    return rows


def _mass_1d(k, x, t):
    f = lambda y: kernel.heat_kernel_1d(k, x, y, t) * 2**k * abs(y) ** (2 * k)
    # the kernel also has a (smaller) bump at the reflected point -x
    w = 12.0 * np.sqrt(t)
    lo, hi = -abs(x) - w, abs(x) + w
    val, _ = integrate.quad(f, lo, hi, points=sorted({0.0, x, -x}), epsabs=0.0, epsrel=1e-11, limit=400)
    return val


def _semigroup_1d(k, x, y, s, t):
    f = lambda z: (kernel.heat_kernel_1d(k, x, z, s) * kernel.heat_kernel_1d(k, z, y, t)
                   * 2**k * abs(z) ** (2 * k))
    w = 12.0 * np.sqrt(s + t)
    a = max(abs(x), abs(y))
    val, _ = integrate.quad(f, -a - w, a + w, points=sorted({0.0, x, y, -x, -y}), epsabs=0.0, epsrel=1e-11, limit=400)
    return abs(val / kernel.heat_kernel_1d(k, x, y, s + t) - 1.0)


def _gl_panels(centers, width, n=48):
    """Composite Gauss-Legendre nodes on [min - width, max + width] split at the given points."""
    cuts = sorted(set([min(centers) - width, max(centers) + width] + list(centers)))
    xg, wg = np.polynomial.legendre.leggauss(n)
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        # four sub-panels per piece keep the |z|^2k kink and the Gaussian peaks resolved
        for aa, bb in zip(np.linspace(a, b, 5)[:-1], np.linspace(a, b, 5)[1:]):
            nodes.append(0.5 * (bb - aa) * xg + 0.5 * (aa + bb))
            weights.append(0.5 * (bb - aa) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def product_mass_and_semigroup(ks, x, y, s, t):
    """(|int h_t(x,.) dw - 1|, |int h_s(x,z) h_t(z,y) dw(z) / h_(s+t)(x,y) - 1|) by 2D tensor quadrature."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    rs = kernel.build_product_A1(len(ks), ks)
    axes = [_gl_panels([x[i], y[i], -x[i], -y[i], 0.0], 10.0 * np.sqrt(s + t)) for i in range(2)]
    Z = np.stack(np.meshgrid(axes[0][0], axes[1][0], indexing="ij"), -1).reshape(-1, 2)
    W = np.outer(axes[0][1], axes[1][1]).ravel() * bounds.weight(rs, Z)
    mass = np.sum(np.exp(kernel.log_heat_kernel_product(ks, x, Z, t)) * W)
    sg = np.sum(np.exp(kernel.log_heat_kernel_product(ks, x, Z, s)
                       + kernel.log_heat_kernel_product(ks, Z, y, t)) * W)
    return abs(mass - 1.0), abs(sg / kernel.heat_kernel_product(ks, x, y, s + t) - 1.0)


def auxiliary_ratios(rs: RootSystem, grp, X, Y, T, log_h, c_u, c_l, c_1, c_eq=0.2) -> dict:
    """Log ratios for the one-step bounds.

    Returns columns for: the one-sided Gaussian bounds (lower uses |x-y|,
    upper uses d); the reflection-sum bounds with C_1 (lower at c_l, upper at
    c_1); and the polynomial-times-Gaussian upper bound at c_eq.
    """
    ks = rs.params["k"]
    d = orbit_distances(grp, X, Y).min(axis=1)
    e2 = np.sum((X - Y) ** 2, axis=1)
    logV = bounds.log_volume_comparable(rs, X, np.sqrt(T))
    poly = -2.0 * np.log1p(np.sqrt(e2 / T))
    refl = poly + _orbit_log_sum_unweighted(rs, ks, X, Y, T)
    return {
        "gauss_lower": log_h - (-logV - c_l * e2 / T),
        "gauss_upper": log_h - (-logV - c_u * d**2 / T),
        "refl_lower": log_h - np.logaddexp(-logV - c_l * e2 / T, refl),
        "refl_upper": log_h - np.logaddexp(-logV - c_1 * e2 / T, refl),
        "poly_upper": log_h - (-logV + poly - c_eq * d**2 / T),
    }


def _family_flags(s, cols, prefix=""):
    out, consts = {}, {}
    for name, r in cols.items():
        direction = +1 if name.endswith("upper") else -1
        ok, ex = trend_test(s, r, direction)
        out[prefix + name + "_finite"] = bool(np.all(np.isfinite(r)))
        out[prefix + name + "_trend"] = ok
        consts[prefix + name] = float(np.exp(r.max() if direction > 0 else r.min()))
    return out, consts


def regularity_ratios(ks, X, Y, Yp, T, c4=4.0, c5=4.0):
    """Log quotients for the Hölder bound (time orders 0 and 1) and the shifted comparison.

    The time derivative comes from the heat-equation identity in closed form,
    which the identity suite validates separately.
    """
    rs = kernel.build_product_A1(len(ks), ks)
    N = rs.dim
    ref = kernel.log_heat_kernel_product(ks, X, Y, c4 * T)
    lh = kernel.log_heat_kernel_product(ks, X, Y, T)
    lhp = kernel.log_heat_kernel_product(ks, X, Yp, T)
    step = np.linalg.norm(Y - Yp, axis=1) / np.sqrt(T)

    def dt_scaled(Yq, log_hq):
        # t d/dt h / h_{c4 t}: sum of the three identity terms, each scaled by exp(-ref)
        orbit = np.exp(logsumexp(_orbit_log_terms(rs, ks, X, Yq, T), axis=1) - ref)
        hq = np.exp(log_hq - ref)
        return hq * np.sum((X - Yq) ** 2, axis=1) / (4 * T) - 0.5 * N * hq - 0.5 * orbit

    q0 = np.abs(np.exp(lh - ref) - np.exp(lhp - ref)) / step
    q1 = np.abs(dt_scaled(Y, lh) - dt_scaled(Yp, lhp)) / step
    small = lh - kernel.log_heat_kernel_product(ks, X, Yp, c5 * T)
    return {"holder_m0": np.log(q0), "holder_m1": np.log(q1), "small_shift": small}


def measure_ratios(k: float, xs, ts, sigma: int):
    """log of mu_x(U(sigma x, t)) / (t^(N/2) Lambda(x, sigma x, t) / w(B(x, sqrt t))) in rank one."""
    rs = kernel.build_product_A1(1, [k])
    grp = generate_group(rs)
    Nh = rs.homogeneous_dim
    out = []
    for x in xs:
        for t in ts:
            mu = kernel.mu_measure_U(k, x, sigma, t)
            lam = bounds.lambda_dp(rs, grp, [x], [sigma * x], t)
            vol = bounds.exact_ball_volume(rs, [x], np.sqrt(t))
            out.append((x, t, np.log(mu) - (0.5 * Nh * np.log(t) + np.log(lam) - np.log(vol))))
    return np.array(out)


def measure_band_flags(rows, extended):
    """One band over the sweep; extending t by a decade each way may widen it by at most log 2.

    rows and extended come from measure_ratios over the base and the
    widened time ranges.
    """
    r, re = rows[:, 2], extended[:, 2]
    finite = bool(np.all(np.isfinite(r)) and np.all(np.isfinite(re)))
    if not finite:
        return {"finite": False, "log_band": np.inf, "widening": np.inf, "pass": False}
    band = float(r.max() - r.min())
    widening = float((re.max() - re.min()) - band)
    return {"finite": True, "log_band": band, "widening": widening, "pass": widening <= LOG2}


def run_identity_suite(cfg: SweepConfig) -> dict:
    """Every identity and auxiliary inequality over rank-one and Z_2^2 sweeps.

    cfg.suite may set: ks (rank-one multiplicities), identity_points, identity_times,
    parts (subset of identities/quadrature/aux/regularity/measure).
    """
    opts = {"ks": list(RANK1_KS), "identity_points": [-2.0, -0.7, 0.3, 1.5],
            "identity_times": [0.1, 0.5, 2.0],
            "parts": ["identities", "quadrature", "aux", "regularity", "measure"]}
    opts.update(cfg.suite)
    tol = {"identity": 1e-5, "quadrature": 1e-6}
    tol.update(cfg.tolerances)
    parts = set(opts["parts"])
    rng = np.random.default_rng(cfg.seed)
    residuals, consts, flags, tables = {}, {}, {}, {}

    if "identities" in parts:
        rows = []
        for k in opts["ks"]:
            rows += _rank1_identity_rows(k, opts["identity_points"], opts["identity_times"])
        rows = np.array(rows)
        kern2 = kernel.ProductKernel([1.0, 1.0])
        prod = []
        for _ in range(20):
            x, y = rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2)
            t = float(10 ** rng.uniform(-1, 0.5))
            prod.append(kernel.check_time_derivative(kern2, x, y, t, relative=True))
        residuals.update(time_derivative=float(max(rows[:, 4].max(), max(prod))),
                         basic_identity=float(rows[:, 5].max()))
        flags["time_derivative"] = residuals["time_derivative"] < tol["identity"]
        flags["basic_identity"] = residuals["basic_identity"] < tol["identity"]
        tables["identities"] = {"k": rows[:, 0], "x": rows[:, 1], "y": rows[:, 2], "t": rows[:, 3],
                                "time_derivative": rows[:, 4], "basic_identity": rows[:, 5]}

    if "quadrature" in parts:
        mass = max(abs(_mass_1d(k, x, t) - 1.0) for k in opts["ks"] for x in (0.0, 0.7, 2.0)
                   for t in (0.1, 0.5, 2.0))
        sg = max(_semigroup_1d(k, x, y, 0.25, 0.25) for k in opts["ks"]
                 for x, y in ((1.0, -0.5), (2.0, 1.5), (0.3, -2.0)))
        m2, s2 = product_mass_and_semigroup([1.0, 1.0], [1.0, -0.5], [0.4, 1.2], 0.25, 0.25)
        residuals.update(unit_mass=float(max(mass, m2)), semigroup=float(max(sg, s2)))
        flags["unit_mass"] = residuals["unit_mass"] < tol["quadrature"]
        flags["semigroup"] = residuals["semigroup"] < tol["quadrature"]

    if "aux" in parts:
        systems = [SweepConfig(system={"family": "product_a1", "N": 1, "k": [k]}, seed=cfg.seed,
                               c_u=cfg.c_u, c_l=cfg.c_l, c_1=cfg.c_1, max_s=cfg.max_s)
                   for k in opts["ks"]]
        systems.append(default_product2_config(seed=cfg.seed, c_u=cfg.c_u, c_l=cfg.c_l, c_1=cfg.c_1,
                                               max_s=cfg.max_s))
        for sc in systems:
            rs = sc.root_system()
            grp = generate_group(rs)
            X, Y, T = _pairs(sc, rs.dim)
            log_h = product_log_h(rs.params["k"], X, Y, T, cfg.jobs)
            cols = auxiliary_ratios(rs, grp, X, Y, T, log_h, sc.c_u, sc.c_l, sc.c_1)
            s = np.sum((X - Y) ** 2, axis=1) / T
            tag = "N{}_k{}_".format(rs.dim, "_".join(f"{v:g}" for v in rs.params["k"]))
            f, c = _family_flags(s, cols, tag)
            flags.update(f)
            consts.update(c)

    if "regularity" in parts:
        for ks in ([1.0], [0.5], [1.0, 1.0]):
            dim = len(ks)
            n = 4000
            X = rng.uniform(-5, 5, (n, dim))
            Y = rng.uniform(-5, 5, (n, dim))
            T = 10 ** rng.uniform(-2, 1, n)
            direc = rng.normal(size=(n, dim))
            direc /= np.linalg.norm(direc, axis=1, keepdims=True)
            Yp = Y + direc * (rng.uniform(0.01, 0.999, n) * 0.5 * np.sqrt(T))[:, None]
            keep = np.sum((X - Y) ** 2, axis=1) / T <= cfg.max_s
            X, Y, Yp, T = X[keep], Y[keep], Yp[keep], T[keep]
            cols = regularity_ratios(ks, X, Y, Yp, T)
            s = np.sum((X - Y) ** 2, axis=1) / T
            tag = "N{}_k{}_".format(dim, "_".join(f"{v:g}" for v in ks))
            for name, r in cols.items():
                ok, ex = trend_test(s, r, +1)
                flags[tag + name + "_finite"] = bool(not np.any(np.isnan(r)) and np.all(r < np.inf))
                flags[tag + name + "_trend"] = ok
                consts[tag + name] = float(np.exp(np.max(r)))

    if "measure" in parts:
        xs = (0.5, 1.0, 2.0, 4.0)
        ts = np.logspace(-2, 2, 17)
        wide = np.logspace(-3, 3, 25)
        for k in (0.5, 1.0):
            for sigma in (1, -1):
                res = measure_band_flags(measure_ratios(k, xs, ts, sigma),
                                         measure_ratios(k, xs, wide, sigma))
                tag = f"measure_k{k:g}_{'id' if sigma == 1 else 'refl'}"
                flags[tag] = res["pass"]
                consts[tag + "_C6"] = float(np.exp(0.5 * res["log_band"]))
                consts[tag + "_widening"] = res["widening"]

    return {"suite": "identities", "pass": bool(all(flags.values())), "flags": flags,
            "empirical_constants": consts, "max_residuals": residuals, "tables": tables}


# ---------------------------------------------------------------------------
# Lambda cross-checks and volumes


def run_lambda_crosscheck(cfg: SweepConfig) -> dict:
    """Dynamic program vs raw word enumeration, Lambda vs Lambda_D, and the time-scaling sandwich."""
    opts = {"triples": 1000, "max_len": 5, "scale_c": 2.0}
    opts.update(cfg.suite)
    tol = {"lambda": 1e-12}
    tol.update(cfg.tolerances)
    rng = np.random.default_rng(cfg.seed)
    systems = {"Z2^1": RootSystem.from_config({"family": "product_a1", "N": 1, "k": [1.0]}),
               "Z2^2": RootSystem.from_config({"family": "product_a1", "N": 2, "k": [1.0, 0.5]}),
               "I2(3)": RootSystem.from_config({"family": "dihedral", "m": 3, "k_even": 1.0}),
               "I2(4)": RootSystem.from_config({"family": "dihedral", "m": 4, "k_even": 1.0, "k_odd": 0.5})}
    flags, residuals, consts = {}, {}, {}
    for name, rs in systems.items():
        grp = generate_group(rs)
        n = int(opts["triples"])
        X = rng.uniform(-3, 3, (n, rs.dim))
        Y = rng.uniform(-3, 3, (n, rs.dim))
        T = 10 ** rng.uniform(-1.5, 1.0, n)
        L = int(opts["max_len"])
        dp = bounds.lambda_dp_batch(rs, grp, X, Y, T, max_len=L)
        bf = np.array([bounds.lambda_bruteforce(rs, grp, x, y, t, L) for x, y, t in zip(X, Y, T)])
        err = float(np.max(np.abs(dp - bf) / np.abs(bf)))
        residuals[name + "_dp_vs_bruteforce"] = err
        flags[name + "_dp_vs_bruteforce"] = err <= tol["lambda"]
        # c^(-2|G|) Lambda(x, y, ct) <= Lambda(x, y, t) <= Lambda(x, y, ct)
        c = float(opts["scale_c"])
        full = bounds.lambda_dp_batch(rs, grp, X, Y, T)
        scaled = bounds.lambda_dp_batch(rs, grp, X, Y, c * T)
        slack = 1e-12 * scaled
        ok = np.all(c ** (-2 * grp.order) * scaled <= full + slack) and np.all(full <= scaled + slack)
        flags[name + "_time_scaling"] = bool(ok)
        if rs.family == "dihedral":
            lam_d = bounds.lambda_dihedral_batch(rs, grp, X, Y, T)
            r = np.log(full / lam_d)
            consts[name + "_lambda_over_lambda_D_max"] = float(np.exp(r.max()))
            consts[name + "_lambda_over_lambda_D_min"] = float(np.exp(r.min()))
            flags[name + "_lambda_D_band"] = bool(np.all(np.isfinite(r)))
    return {"suite": "lambda-check", "pass": bool(all(flags.values())), "flags": flags,
            "empirical_constants": consts, "max_residuals": residuals}


def run_volume_check(cfg: SweepConfig) -> dict:
    """Exact ball volume against the comparable r^N prod (|<x,alpha>| + r)^k, plus doubling."""
    opts = {"ks": list(RANK1_KS), "x": {"low": 0.0, "high": 10.0, "num": 21},
            "r": {"low": -2.0, "high": 1.0, "num": 13}, "planar_points": 6}
    opts.update(cfg.suite)
    xs = np.linspace(opts["x"]["low"], opts["x"]["high"], int(opts["x"]["num"]))
    rads = np.logspace(opts["r"]["low"], opts["r"]["high"], int(opts["r"]["num"]))
    flags, consts = {}, {}
    rows = []
    rng = np.random.default_rng(cfg.seed)
    cases = [(RootSystem.from_config({"family": "product_a1", "N": 1, "k": [k]}), [[x] for x in xs])
             for k in opts["ks"]]
    planar = rng.uniform(0.0, 10.0, (int(opts["planar_points"]), 2))
    cases.append((RootSystem.from_config({"family": "dihedral", "m": 3, "k_even": 1.0}), planar.tolist()))
    for rs, pts in cases:
        tag = rs.family + "_" + "_".join(f"{v:g}" for v in np.unique(rs.mult))
        # planar cases use a coarser radius list to keep the 2D quadrature cheap
        rr = rads if rs.dim == 1 else rads[::3]
        ratio, dbl = [], []
        for x in pts:
            vols = np.array([bounds.exact_ball_volume(rs, x, r) for r in np.concatenate([rr, 2 * rr])])
            comp = np.exp(bounds.log_volume_comparable(rs, np.asarray(x), rr))
            ratio += list(vols[: len(rr)] / comp)
            dbl += list(vols[len(rr):] / vols[: len(rr)])
            rows += [(tag, *np.pad(x, (0, 2 - len(x))), r, v, c) for r, v, c in zip(rr, vols[: len(rr)], comp)]
        ratio, dbl = np.array(ratio), np.array(dbl)
        C = float(max(ratio.max(), 1.0 / ratio.min()))
        consts[tag + "_C"] = C
        consts[tag + "_doubling"] = float(dbl.max())
        # the comparable doubles by at most 2^N_h, so the exact doubling is at most C^2 2^N_h
        flags[tag + "_band"] = bool(np.all(np.isfinite(ratio)) and ratio.min() > 0)
        flags[tag + "_doubling"] = bool(dbl.max() <= C**2 * 2**rs.homogeneous_dim)
    table = {"system": [r[0] for r in rows], "x0": [r[1] for r in rows], "x1": [r[2] for r in rows],
             "r": [r[3] for r in rows], "exact": [r[4] for r in rows], "comparable": [r[5] for r in rows]}
    return {"suite": "volume-check", "pass": bool(all(flags.values())), "flags": flags,
            "empirical_constants": consts, "max_residuals": {}, "tables": {"volumes": table}}


def run_pde_suite(cfg: SweepConfig, snapshot_path=None) -> dict:
    """Run the grid solver from cfg.pde and summarize mass, positivity and (kernel mode) the error band.

    cfg.pde keys: mode ("kernel" or "gaussian"), q, n_r, R_max, x0, t_target,
    t_init (kernel mode), width (gaussian mode, the variance parameter s0 of
    exp(-|x-x0|^2/4 s0)), snapshot_times.
    """
    rs = cfg.root_system()
    if rs.dim != 2:
        raise ConfigurationError("the grid solver is two-dimensional")
    p = {"mode": "kernel", "q": 1, "n_r": 40, "R_max": 7.0, "x0": [1.5, 1.0], "t_target": 0.5,
         "t_init": 0.04, "width": 0.05, "snapshot_times": [], "band": True}
    p.update(cfg.pde)
    m = rs.params["m"] if rs.family == "dihedral" else 2
    grid = pde.build_grid(m, int(p["q"]), int(p["n_r"]), float(p["R_max"]))
    solver = pde.HeatSolver(grid, pde.multiplicities_for(grid, rs))
    x0 = np.asarray(p["x0"], dtype=float)
    consts = {"dt_max": solver.dt_max, "nodes": grid.n_nodes}
    if p["mode"] == "kernel":
        ap = pde.approximate_kernel(solver, x0, float(p["t_target"]), float(p["t_init"]), band=bool(p["band"]))
        state = ap.state
        consts.update(source=ap.x0.tolist(), band=ap.band, band_parts=ap.band_parts)
        if snapshot_path is not None:
            with open(snapshot_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["time", "r", "theta", "u"])
                solver._write_snapshot(w, state)
    elif p["mode"] == "gaussian":
        s0 = float(p["width"])
        u0 = np.exp(-np.sum((solver.points - x0) ** 2, axis=1) / (4 * s0))
        start = solver.state(u0)
        times = list(p["snapshot_times"]) or [float(p["t_target"])]
        state = solver.evolve(start, float(p["t_target"]), snapshot_times=times, snapshot_path=snapshot_path)
        consts.update(initial_mass=start.mass)
    else:
        raise ConfigurationError(f"unknown pde mode {p['mode']!r}")
    u = state.u
    consts.update(final_mass=state.mass, min_over_max=float(u.min() / u.max()))
    ok = bool(np.all(np.isfinite(u)) and u.min() >= -solver.positivity_rtol * u.max())
    return {"suite": "pde-run", "pass": ok, "flags": {"finite_and_positive": ok},
            "empirical_constants": consts, "max_residuals": {}}


# ---------------------------------------------------------------------------
# output


def write_summary(path, suite: str, passed: bool, constants: dict, residuals: dict, cfg: SweepConfig,
                  flags: dict | None = None):
    doc = {"suite": suite, "pass": bool(passed), "empirical_constants": constants,
           "max_residuals": residuals, "config_echo": cfg.to_dict()}
    if flags is not None:
        doc["flags"] = flags
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v)}")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
