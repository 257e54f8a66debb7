"""Acceptance criteria 1-9; each adds one PASS/FAIL line to the end-of-run summary."""

import time

import numpy as np
import pytest

from dunkl_heat import harness, kernel, pde
from dunkl_heat.bounds import weight
from dunkl_heat.rootsys import build_product_A1, generate_group

pytestmark = pytest.mark.slow


def report(emit, n, ok, detail, t0):
    line = f"Criterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; {time.time() - t0:.1f} s)"
    print("\n" + line)
    emit(line)


def test_criterion_1_sandwich_product_systems(criterion_line):
    t0 = time.time()
    rows, ok = [], True
    for name, cfg in (("Z2^1 k=1", harness.SweepConfig()), ("Z2^2 k=(1,1)", harness.default_product2_config())):
        rep = harness.run_verify_bounds(cfg)
        s = rep.summary
        good = rep.passed and s["points"] >= 10_000 and np.isfinite(s["C_u"]) and s["C_l"] > 0
        ok &= good
        rows.append(f"{name}: {s['points']} pts, C_u={s['C_u']:.3g}, C_l={s['C_l']:.3g}, "
                    f"trend excess {s['trend_upper']:.2f}/{s['trend_lower']:.2f}")
    elapsed = time.time() - t0
    ok &= elapsed < 300
    report(criterion_line, 1, ok, "; ".join(rows), t0)
    assert ok


def test_criterion_2_lambda_dp_vs_oracle(criterion_line):
    t0 = time.time()
    res = harness.run_lambda_crosscheck(harness.SweepConfig(suite={"triples": 1000, "max_len": 5}))
    worst = max(res["max_residuals"].values())
    ok = res["pass"] and worst <= 1e-12 and time.time() - t0 < 60
    report(criterion_line, 2, ok, f"worst DP/brute-force relative gap {worst:.2e} over 4 systems x 1000 triples", t0)
    assert ok


def test_criterion_3_closed_form_vs_rosler(criterion_line):
    t0 = time.time()
    rng = np.random.default_rng(2024)
    n = 1000
    ks = rng.choice([0.3, 0.5, 1.0, 2.3], n)
    xs = rng.uniform(-3, 3, n)
    ys = rng.uniform(-3, 3, n)
    ts = 10 ** rng.uniform(-1, 1, n)
    rel = np.array([abs(kernel.rosler_eval_1d(k, x, y, t) / kernel.heat_kernel_1d(k, x, y, t) - 1)
                    for k, x, y, t in zip(ks, xs, ys, ts)])
    ok = rel.max() <= 1e-8
    report(criterion_line, 3, ok, f"max relative gap {rel.max():.2e} over {n} triples", t0)
    assert ok


def test_criterion_4_identity_suite(criterion_line):
    t0 = time.time()
    res = harness.run_identity_suite(harness.SweepConfig(suite={"parts": ["identities", "quadrature", "aux"]}))
    r = res["max_residuals"]
    failed = [k for k, v in res["flags"].items() if not v]
    ok = (res["pass"] and r["time_derivative"] < 1e-5 and r["basic_identity"] < 1e-5
          and r["unit_mass"] < 1e-6 and r["semigroup"] < 1e-6)
    report(criterion_line, 4, ok, f"residuals {', '.join(f'{k}={v:.1e}' for k, v in sorted(r.items()))}; "
           f"{len(res['flags'])} inequality flags, failing: {failed or 'none'}", t0)
    assert ok


def test_criterion_5_volume(criterion_line):
    t0 = time.time()
    res = harness.run_volume_check(harness.SweepConfig())
    c = res["empirical_constants"]
    ok = res["pass"]
    report(criterion_line, 5, ok, ", ".join(f"{k}={v:.3g}" for k, v in sorted(c.items())), t0)
    assert ok


def test_criterion_6_regularity(criterion_line):
    t0 = time.time()
    res = harness.run_identity_suite(harness.SweepConfig(suite={"parts": ["regularity"]}))
    c = res["empirical_constants"]
    failed = [k for k, v in res["flags"].items() if not v]
    ok = res["pass"]
    report(criterion_line, 6, ok, f"largest constant {max(c.values()):.3g}; failing: {failed or 'none'}", t0)
    assert ok


def test_criterion_7_measure_band(criterion_line):
    t0 = time.time()
    res = harness.run_identity_suite(harness.SweepConfig(suite={"parts": ["measure"]}))
    c = res["empirical_constants"]
    c6 = {k: v for k, v in c.items() if k.endswith("_C6")}
    ok = res["pass"]
    report(criterion_line, 7, ok, "C6 " + ", ".join(f"{k.split('_', 1)[1][:-3]}={v:.3g}" for k, v in sorted(c6.items())), t0)
    assert ok


def _gaussian_oracle(ks, x0, s, T, P):
    """Exact evolution of exp(-|x-x0|^2 / 2s^2) by Gauss-Hermite quadrature against the closed-form kernel."""
    rs = build_product_A1(2, ks)
    xi, wi = np.polynomial.hermite.hermgauss(24)
    Z = np.stack(np.meshgrid(xi, xi, indexing="ij"), -1).reshape(-1, 2)
    WZ = np.outer(wi, wi).ravel()
    Zp = x0 + np.sqrt(2) * s * Z
    wz = weight(rs, Zp)
    out = np.empty(len(P))
    for a in range(0, len(P), 2000):
        lh = kernel.log_heat_kernel_product(ks, P[a:a + 2000, None, :], Zp[None], T)
        out[a:a + 2000] = 2 * s * s * (np.exp(lh) * wz * WZ).sum(-1)
    return out


def test_criterion_8_pde_validation(criterion_line):
    t0 = time.time()
    ks, x0, s, T, R = [1.0, 1.0], np.array([1.2, 0.8]), 0.3, 0.5, 6.0
    rs = build_product_A1(2, ks)
    errs = {}
    for n_r in (40, 80):
        g = pde.build_grid(2, 1, n_r, R)
        S = pde.HeatSolver(g, pde.multiplicities_for(g, rs), positivity_rtol=np.inf)
        u0 = np.exp(-np.sum((S.points - x0) ** 2, axis=1) / (2 * s * s))
        u = S.evolve(S.state(u0), T).u
        ex = _gaussian_oracle(ks, x0, s, T, S.points)
        bulk = ex > 1e-3 * ex.max()
        errs[n_r] = float(np.max(np.abs(u[bulk] - ex[bulk]) / ex[bulk]))
    factor = errs[40] / errs[80]

    s0 = 0.045
    g = pde.build_grid(2, 1, 160, R)
    S = pde.HeatSolver(g, np.zeros(4), positivity_rtol=np.inf)
    d2 = lambda v: np.sum((S.points - x0) ** 2, axis=1) / (4 * v)
    u = S.evolve(S.state(np.exp(-d2(s0))), T).u
    ex = s0 / (s0 + T) * np.exp(-d2(s0 + T))
    bulk = ex > 1e-3 * ex.max()
    classical = float(np.max(np.abs(u[bulk] - ex[bulk]) / ex[bulk]))

    ok = errs[80] < 0.02 and classical < 0.01 and factor >= 3
    report(criterion_line, 8, ok, f"k=1 error {errs[40]:.2%} (n_r=40) -> {errs[80]:.2%} (n_r=80), factor {factor:.2f}; "
           f"k=0 error {classical:.2%} (n_r=160)", t0)
    assert ok


def _exact_m2_control(cfg):
    """Same band statistic with the exact product kernel, to separate solver error from envelope slack."""
    rs = build_product_A1(2, [1.0, 1.0])
    grp = generate_group(rs)
    P = np.random.default_rng(0).uniform(-6, 6, (20000, 2))
    x0 = np.array([1.5, 1.5])
    lh = kernel.log_heat_kernel_product([1.0, 1.0], np.broadcast_to(x0, P.shape), P, 0.5)
    keep = lh > np.log(1e-3) + lh.max()
    X, Y = np.broadcast_to(x0, P[keep].shape), P[keep]
    rep = harness.envelope_report(rs, grp, X, Y, 0.5, lh[keep], cfg.c_u, cfg.c_l, trend=False)
    return float(np.exp(rep.summary["log_band"]))


def test_criterion_9_dihedral_pde_band(criterion_line):
    t0 = time.time()
    cfg = harness.default_dihedral_pde_config()
    rep = harness.run_verify_bounds(cfg)
    s = rep.summary
    ok = rep.passed and s["band"] <= 10
    control = _exact_m2_control(cfg)
    report(criterion_line, 9, ok, f"band C_u/C_l = {s['band']:.4g} vs target 10 over {s['points']} grid points, "
           f"solver band {s['solver_band']:.3f}; exact m=2 kernel gives {control:.4g} by the same statistic "
           f"[solver-limited tolerance]", t0)
    assert ok
