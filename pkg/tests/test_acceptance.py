"""Acceptance gate: eight numbered criteria at their stated tolerances and time budgets.

Each test records a single PASS/FAIL line, printed in the terminal summary.
"""

import json
import math
import time

import numpy as np

from mvhedge import (
    ModelParams,
    PathBatch,
    PdeGrid,
    ProjectionContext,
    make_claim,
    optimality_probe,
    project_terminal,
    run_hedge,
    solve_surfaces,
    wealth_sweep,
)
from mvhedge.cli import EXIT_OK, main
from mvhedge.pde import solve_v2
from mvhedge.value_coeff import DeterministicTheta, NuQuery, solve_nu, v2_closed_form

from conftest import ACCEPTANCE_LINES

BASE = ModelParams(mu=0.5, sigma=1.0, rho=0.5, T=1.0)
N_PATHS = 100_000


def record(n, title, ok, elapsed, budget, detail):
    ok = bool(ok) and elapsed < budget
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title}: "
                            f"{detail}; {elapsed:.3g} s (budget {budget:g} s)")
    return ok


def surfaces(c, m=BASE):
    return solve_surfaces(c, m.theta, m.context(), PdeGrid.centered(m.T))


def test_1_root_identity():
    rhos = (0.0, 0.25, 0.5, 0.75, 0.99, 1.0)
    t0 = time.perf_counter()
    roots = [solve_nu(NuQuery(r, 1 - r * r)) for r in rhos]
    elapsed = time.perf_counter() - t0
    err = max(abs(x - 1.0) for x in roots)
    assert record(1, "unit root at alpha = 1 - rho^2", err <= 1e-10, elapsed, 1e-3,
                  f"max |nu - 1| = {err:.2e}")


def test_2_complete_information_limit():
    theta, T = 0.7, 1.5
    t = np.linspace(0.0, T, 31)
    t0 = time.perf_counter()
    v = v2_closed_form(DeterministicTheta(theta, T), 1.0, t)
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(v - np.exp(-theta**2 * (T - t)))))
    assert record(2, "rho = 1 gives exp(-theta^2 (T - t))", err <= 1e-8, elapsed, 1e-2,
                  f"max error {err:.2e}")


def test_3_solver_agreement():
    T = 1.0
    grid = PdeGrid.centered(T)
    fine = grid.refined()
    worst_dev, worst_ratio, ok = 0.0, math.inf, True
    t0 = time.perf_counter()
    for theta in (0.2, 0.5, 1.0):
        for rho in (0.3, 0.7):
            m = DeterministicTheta(theta, T)
            dev = np.max(np.abs(solve_v2(theta, rho, grid) - v2_closed_form(m, rho, grid.t)[:, None]))
            dev_f = np.max(np.abs(solve_v2(theta, rho, fine) - v2_closed_form(m, rho, fine.t)[:, None]))
            ratio = dev / dev_f
            ok &= dev <= 1e-3 and ratio >= 3.0
            worst_dev, worst_ratio = max(worst_dev, dev), min(worst_ratio, ratio)
    elapsed = time.perf_counter() - t0
    assert record(3, "PDE v2 agrees with the closed-form root", ok, elapsed, 5.0,
                  f"max deviation {worst_dev:.2e}, min refinement ratio {worst_ratio:.2f}")


def test_4_decomposition_identity():
    claims = {"H=0": make_claim("zero"), "H=y": make_claim("linear", a=0.0, b=1.0),
              "H=x": make_claim("linear"), "H=max(x,0)": make_claim("call")}
    ok, parts = True, []
    t0 = time.perf_counter()
    for label, c in claims.items():
        s = surfaces(c)
        zs = []
        for steps in (128, 256):
            r = run_hedge(PathBatch(BASE, N_PATHS, steps, 4), s, c, BASE, 1.0)
            z = r.identity_residual / r.identity_residual_se if r.identity_residual_se else 0.0
            ok &= abs(r.identity_residual) <= 3 * r.identity_residual_se
            zs.append(z)
        parts.append(f"{label} {zs[0]:+.2f}/{zs[1]:+.2f}")
    elapsed = time.perf_counter() - t0
    assert record(4, "E(X_T - H)^2 = E(H - H_hat)^2 + reduced objective", ok, elapsed, 60.0,
                  "residual/SE at 128/256 steps: " + ", ".join(parts))


def test_5_quadratic_value():
    c = make_claim("call")
    t0 = time.perf_counter()
    s = surfaces(c)
    fit = wealth_sweep(PathBatch(BASE, N_PATHS, 256, 5), s, c, BASE, [-2.0, -1.0, 0.0, 1.0, 2.0])
    elapsed = time.perf_counter() - t0
    v0, v1, v2 = (float(s.interp(k, 0.0, 0.0)) for k in ("v0", "v1", "v2"))
    target = (v0, -2 * v1, v2)
    zs = [(a - b) / se for a, b, se in zip(fit.coef, target, fit.coef_se)]
    ok = fit.r_squared >= 1 - 1e-3 and all(abs(z) <= 3 for z in zs)
    assert record(5, "reduced objective is v0 - 2 v1 x + v2 x^2", ok, elapsed, 120.0,
                  f"R^2 = {fit.r_squared:.6f}, coefficient z-scores "
                  + ", ".join(f"{z:+.2f}" for z in zs))


def test_6_optimality():
    c = make_claim("linear")
    t0 = time.perf_counter()
    s = surfaces(c)
    batch = PathBatch(BASE, N_PATHS, 256, 6)
    ok, parts, drift = True, [], None
    for scale in (0.0, 0.5, 1.5, 2.0):
        p = optimality_probe(batch, s, c, BASE, 0.0, scale)
        ok &= p.difference > 3 * p.difference_se
        parts.append(f"{scale:g}: {p.difference / p.difference_se:.0f} SE")
        drift = p
    ok &= abs(drift.drift_optimal) <= 3 * drift.drift_optimal_se
    elapsed = time.perf_counter() - t0
    assert record(6, "perturbations of pi* do worse; pi* has zero drift", ok, elapsed, 120.0,
                  "excess " + ", ".join(parts)
                  + f"; drift along pi* {drift.drift_optimal / drift.drift_optimal_se:+.2f} SE")


def test_7_oracle_equivalence(tmp_path):
    ok, parts = True, []
    t0 = time.perf_counter()
    for name in ("zero", "linear"):
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text("model.mu = 0.5\nmodel.sigma = 1.0\nmodel.rho = 0.5\nmodel.T = 1.0\n"
                       f"claim.name = {name}\noracle.n_steps = 12\noracle.x = -2, -1, 0, 1, 2\n")
        out = tmp_path / name
        code = main(["oracle-check", "--config", str(cfg), "--out", str(out)])
        summary = json.loads((out / "oracle_summary.json").read_text())
        ok &= (code == EXIT_OK and summary["max_rel_gap"] <= 0.02
               and summary["max_fit_residual"] < 1e-6)
        parts.append(f"{name}: gap {summary['max_rel_gap']:.2e}, fit {summary['max_fit_residual']:.1e}")
    elapsed = time.perf_counter() - t0
    assert record(7, "lattice oracle matches PDE value", ok, elapsed, 30.0, "; ".join(parts))


def test_8_projection_identities():
    t0 = time.perf_counter()
    y = np.linspace(-4.0, 4.0, 41)
    err = 0.0
    for rho in (-0.7, 0.0, 0.5, 0.9):
        for T in (0.5, 1.0, 2.0):
            ctx = ProjectionContext(rho, T, quad_nodes=64)
            err = max(err,
                      np.max(np.abs(project_terminal(make_claim("linear", a=0.0, b=1.0), ctx, y) - y)),
                      np.max(np.abs(project_terminal(make_claim("linear"), ctx, y) - rho * y)),
                      np.max(np.abs(project_terminal(make_claim("quadratic"), ctx, y)
                                    - (rho**2 * y**2 + (1 - rho**2) * T))))
    rng = np.random.default_rng(8)
    n, rho, T = 200_000, 0.5, 1.0
    w = rng.standard_normal(n) * math.sqrt(T)
    x = rho * w - math.sqrt(1 - rho**2) * rng.standard_normal(n) * math.sqrt(T)
    c = make_claim("call")
    gap = c(x, w) ** 2 - project_terminal(c, ProjectionContext(rho, T), w) ** 2
    z = gap.mean() / (gap.std(ddof=1) / math.sqrt(n))
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-10 and z >= -3
    assert record(8, "projection identities and contraction", ok, elapsed, 5.0,
                  f"max identity error {err:.1e}, E H^2 - E H_hat^2 at {z:+.1f} SE")

