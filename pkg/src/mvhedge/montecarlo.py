"""Monte Carlo hedging under partial information.

The traded asset follows dS = mu dt + sigma dw0, the hedger observes only
w. Paths are built from independent increments of w and wperp with

    dw0 = rho dw - sqrt(1 - rho^2) dwperp,

so the filtered price is dS_hat = sigma (theta dt + rho dw). Strategies are
evaluated on a uniform Euler grid; the filtered wealth X_hat and the true
wealth X are integrated side by side so that both objectives of the
decomposition E(X_T - H)^2 = E(H - H_hat)^2 + reduced objective can be
estimated on the same sample.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .claims import Claim, ProjectionContext, claim_term, conditional_dx_table, project_terminal
from .pde import ExtrapolationError, ValueSurfaces

__all__ = [
    "ModelParams",
    "PathBatch",
    "HedgeReport",
    "ProbeResult",
    "ExtrapolationError",
    "WealthBlowUpError",
    "simulate",
    "optimal_control",
    "run_hedge",
    "optimality_probe",
    "wealth_sweep",
    "SweepFit",
    "mean_se",
]

THREADS_ENV = "MVHEDGE_THREADS"


class WealthBlowUpError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModelParams:
    mu: float
    sigma: float
    rho: float
    T: float
    theta_fn: Optional[Callable] = None  # Markovian theta(t, y); overrides mu/sigma drift

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be < 1")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def theta(self) -> float:
        return self.mu / self.sigma

    def price_of_risk(self, t, y):
        if self.theta_fn is None:
            return np.full(np.shape(y), self.theta) if np.ndim(y) else self.theta
        return np.broadcast_to(np.asarray(self.theta_fn(t, y), float), np.shape(y))

    def context(self, quad_nodes: int = 64, mal_variant: str = "second_arg_unscaled"):
        return ProjectionContext(self.rho, self.T, quad_nodes, mal_variant)


@dataclass(frozen=True)
class PathBatch:
    """Seeded batch of Brownian increments, generated lazily in blocks.

    Block ``b`` draws from its own Philox stream keyed by (seed, b), so
    enlarging ``n_paths`` leaves earlier paths unchanged.
    """

    params: ModelParams
    n_paths: int
    n_steps: int
    seed: int
    block_size: int = 4096

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be >= 1")

    @property
    def dt(self) -> float:
        return self.params.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.params.T, self.n_steps + 1)

    @property
    def n_blocks(self) -> int:
        return -(-self.n_paths // self.block_size)

    def block_range(self, b: int) -> tuple[int, int]:
        lo = b * self.block_size
        return lo, min(lo + self.block_size, self.n_paths)

    def block(self, b: int) -> tuple[np.ndarray, np.ndarray]:
        """(dw, dwperp) increments of block ``b``, shape (n_steps, paths)."""
        lo, hi = self.block_range(b)
        ss = np.random.SeedSequence(self.seed, spawn_key=(b,))
        rng = np.random.Generator(np.random.Philox(ss))
        z = rng.standard_normal((2, self.n_steps, self.block_size))[:, :, : hi - lo]
        z *= math.sqrt(self.dt)
        return z[0], z[1]

    def increments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All (dw0, dw, dwperp), each of shape (n_paths, n_steps)."""
        parts = [self.block(b) for b in range(self.n_blocks)]
        dw = np.concatenate([p[0] for p in parts], axis=1).T
        dwp = np.concatenate([p[1] for p in parts], axis=1).T
        r = self.params.rho
        return r * dw - math.sqrt(1 - r * r) * dwp, dw, dwp

    def paths(self) -> tuple[np.ndarray, np.ndarray]:
        """(S, Y) paths of shape (n_paths, n_steps + 1), S_0 = Y_0 = 0."""
        dw0, dw, _ = self.increments()
        p = self.params
        Y = np.zeros((self.n_paths, self.n_steps + 1))
        Y[:, 1:] = np.cumsum(dw, axis=1)
        th = np.stack([p.price_of_risk(t, Y[:, k]) for k, t in enumerate(self.times[:-1])], axis=1)
        S = np.zeros_like(Y)
        S[:, 1:] = np.cumsum(p.sigma * (th * self.dt + dw0), axis=1)
        return S, Y


def simulate(m: ModelParams, n_paths: int, n_steps: int, seed: int, **kw) -> PathBatch:
    return PathBatch(m, n_paths, n_steps, seed, **kw)


@dataclass
class HedgeReport:
    full_error: float
    full_error_se: float
    reduced_objective: float
    reduced_objective_se: float
    correction: float
    correction_se: float
    identity_residual: float
    identity_residual_se: float
    value_at_origin: float
    drift: float
    drift_se: float
    x0: float
    n_paths: int
    n_steps: int
    seed: int
    exited_paths: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


@dataclass
class ProbeResult:
    optimal: float
    perturbed: float
    difference: float
    difference_se: float
    optimal_full: float
    perturbed_full: float
    drift_optimal: float
    drift_optimal_se: float
    drift_perturbed: float
    drift_perturbed_se: float

    def __iter__(self):
        yield self.optimal
        yield self.perturbed

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def mean_se(x: np.ndarray, deterministic: bool = True) -> tuple[float, float]:
    """Sample mean and its standard error; exact-rounded sums when deterministic."""
    x = np.asarray(x, float).ravel()
    n = x.size
    if deterministic:
        m = math.fsum(x) / n
        var = math.fsum((x - m) ** 2) / max(n - 1, 1)
    else:
        m = float(x.mean())
        var = float(x.var(ddof=1)) if n > 1 else 0.0
    return m, math.sqrt(var / n)


# ------------------------------------------------------------- strategy

def _check_domain(surfaces: ValueSurfaces, t, y):
    if not np.all(surfaces.contains(t, y)):
        raise ExtrapolationError("(t, y) outside the surface domain")


def optimal_control(surfaces: ValueSurfaces, c: Claim, m: ModelParams, t, X, y,
                    ctx: ProjectionContext = None):
    """Optimal amount invested at time t given filtered wealth X and observation y.

    pi* = [(theta v1 + rho z1 + q) - (theta v2 + rho z2) X] / (sigma D),
    D = 1 - rho^2 + rho^2 v2, q = (1 - rho^2) E[dH/dx | w_t = y].
    """
    _check_domain(surfaces, t, y)
    ctx = ctx or m.context()
    r = m.rho
    v2, z2, v1, z1 = (surfaces.interp(k, t, y) for k in ("v2", "z2", "v1", "z1"))
    th = m.price_of_risk(t, np.asarray(y, float))
    q = claim_term(c, ctx, t, y)
    den = 1 - r * r + r * r * v2
    return ((th * v1 + r * z1 + q) - (th * v2 + r * z2) * np.asarray(X, float)) / (m.sigma * den)


class _Tables:
    """Strategy coefficients tabulated on the Monte Carlo time grid."""

    def __init__(self, surfaces: ValueSurfaces, c: Claim, m: ModelParams, ctx, times):
        ys = surfaces.y
        k = max(1, math.ceil((ys[1] - ys[0]) / 0.01))
        yg = np.linspace(ys[0], ys[-1], (ys.size - 1) * k + 1)
        tt = np.clip(times, surfaces.t[0], surfaces.t[-1])
        T_, Y_ = np.meshgrid(tt, yg, indexing="ij")
        s = {n: surfaces.interp(n, T_, Y_) for n in ("v2", "z2", "v1", "z1", "v0")}
        r = m.rho
        th = np.stack([m.price_of_risk(t, yg) for t in times])
        if ctx.s == 0.0:
            q = np.zeros_like(T_)
        else:
            q = ctx.s ** 2 * conditional_dx_table(c, ctx, times, yg)
        den = 1 - r * r + r * r * s["v2"]
        self.alpha = (th * s["v2"] + r * s["z2"]) / den
        self.beta = (th * s["v1"] + r * s["z1"] + q) / den
        self.htilde = -q / m.sigma
        self.y0, self.dy, self.ny = yg[0], yg[1] - yg[0], yg.size

    def locate(self, y):
        u = (y - self.y0) / self.dy
        out = (u < 0) | (u > self.ny - 1)
        u = np.clip(u, 0, self.ny - 1)
        j = np.minimum(u.astype(np.intp), self.ny - 2)
        return j, u - j, out

    @staticmethod
    def at(table_row, j, f):
        return table_row[j] * (1 - f) + table_row[j + 1] * f


Strategy = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _as_strategy(perturbation) -> Optional[Strategy]:
    if perturbation is None or callable(perturbation):
        return perturbation
    scale = float(perturbation)
    return lambda t, xhat, y, pi: scale * pi


def _run_block(batch: PathBatch, b: int, tab: _Tables, c: Claim, ctx, x0: float,
               strategy: Optional[Strategy]):
    dw, dwp = batch.block(b)
    n = dw.shape[1]
    w = np.zeros(n)
    w0 = np.zeros(n)
    xhat = np.full(n, float(x0))
    x = np.full(n, float(x0))
    cost = np.zeros(n)
    exited = np.zeros(n, bool)
    with np.errstate(over="ignore", invalid="ignore"):
        _euler(batch, tab, strategy, dw, dwp, w, w0, xhat, x, cost, exited)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xhat))):
        raise WealthBlowUpError("non-finite wealth")
    H = c(w0, w)
    Hhat = np.asarray(project_terminal(c, ctx, w), float)
    return dict(X_T=x, Xhat_T=xhat, H=H, H_hat_T=Hhat, cost=cost, exited=exited)


def _euler(batch, tab, strategy, dw, dwp, w, w0, xhat, x, cost, exited):
    """Left-point Euler steps, updating the state arrays in place."""
    m = batch.params
    n = dw.shape[1]
    r, s, sig, dt = m.rho, math.sqrt(1 - m.rho**2), m.sigma, batch.dt
    for k, t in enumerate(batch.times[:-1]):
        j, f, out = tab.locate(w)
        exited |= out
        pi = (tab.at(tab.beta[k], j, f) - tab.at(tab.alpha[k], j, f) * xhat) / sig
        if strategy is not None:
            pi = np.asarray(strategy(t, xhat, w, pi), float) * np.ones(n)
        ht = tab.at(tab.htilde[k], j, f)
        th = m.price_of_risk(t, w)
        dw0 = r * dw[k] - s * dwp[k]
        cost += (pi * pi * (1 - r * r) + 2 * pi * ht) * sig * sig * dt
        xhat += pi * sig * (th * dt + r * dw[k])
        x += pi * sig * (th * dt + dw0)
        w += dw[k]
        w0 += dw0


def _simulate(batch: PathBatch, surfaces: ValueSurfaces, c: Claim, m: ModelParams,
              x0: float, strategy=None, ctx=None, tables=None) -> dict:
    if not math.isclose(surfaces.T, m.T):
        raise ValueError("surfaces and model disagree on the horizon")
    ctx = ctx or m.context()
    tab = tables or _Tables(surfaces, c, m, ctx, batch.times)
    threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    run = lambda b: _run_block(batch, b, tab, c, ctx, x0, strategy)  # noqa: E731
    if threads > 1 and batch.n_blocks > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, range(batch.n_blocks)))
    else:
        parts = [run(b) for b in range(batch.n_blocks)]
    out = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    out["full"] = (out["X_T"] - out["H"]) ** 2
    out["reduced"] = (out["Xhat_T"] - out["H_hat_T"]) ** 2 + out["cost"]
    out["correction"] = (out["H"] - out["H_hat_T"]) ** 2
    out["residual"] = out["full"] - out["reduced"] - out["correction"]
    return out


def run_hedge(batch: PathBatch, surfaces: ValueSurfaces, c: Claim, m: ModelParams,
              x0: float, *, strategy=None, ctx: ProjectionContext = None,
              deterministic: bool = True, paths_csv=None) -> HedgeReport:
    """Hedge ``c`` from initial capital ``x0`` along ``batch``.

    ``strategy`` optionally replaces the optimal control; it is called as
    ``strategy(t, xhat, y, pi_star)`` and returns the amount invested.
    """
    if batch.params != m:
        raise ValueError("batch was simulated under different model parameters")
    d = _simulate(batch, surfaces, c, m, x0, strategy, ctx)
    full, full_se = mean_se(d["full"], deterministic)
    red, red_se = mean_se(d["reduced"], deterministic)
    corr, corr_se = mean_se(d["correction"], deterministic)
    _, res_se = mean_se(d["residual"], deterministic)
    v_origin = float(surfaces.value(0.0, x0, 0.0))
    if paths_csv is not None:
        _write_paths(paths_csv, d)
    return HedgeReport(
        full_error=full, full_error_se=full_se,
        reduced_objective=red, reduced_objective_se=red_se,
        correction=corr, correction_se=corr_se,
        identity_residual=full - red - corr, identity_residual_se=res_se,
        value_at_origin=v_origin,
        drift=(red - v_origin) / m.T, drift_se=red_se / m.T,
        x0=float(x0), n_paths=batch.n_paths, n_steps=batch.n_steps, seed=batch.seed,
        exited_paths=int(np.count_nonzero(d["exited"])),
    )


def _write_paths(path, d):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "X_T", "Xhat_T", "H", "H_hat_T", "cost", "full", "reduced",
                    "correction", "residual"])
        cols = ("X_T", "Xhat_T", "H", "H_hat_T", "cost", "full", "reduced", "correction",
                "residual")
        for i in range(d["X_T"].size):
            w.writerow([i] + [repr(float(d[k][i])) for k in cols])


def optimality_probe(batch: PathBatch, surfaces: ValueSurfaces, c: Claim, m: ModelParams,
                     x0: float, perturbation: Union[float, Strategy], *,
                     ctx: ProjectionContext = None, deterministic: bool = True) -> ProbeResult:
    """Compare the optimal strategy with a perturbed one on common paths.

    ``perturbation`` is a scale applied to pi* or a strategy callable
    ``(t, xhat, y, pi_star) -> pi``. The drift statistics are
    (E[Y_T] - Y_0)/T for Y_t = V^H(t, X_hat_t) + accrued cost, which is
    zero for the optimal strategy and positive otherwise.
    """
    ctx = ctx or m.context()
    tab = _Tables(surfaces, c, m, ctx, batch.times)
    opt = _simulate(batch, surfaces, c, m, x0, None, ctx, tab)
    pert = _simulate(batch, surfaces, c, m, x0, _as_strategy(perturbation), ctx, tab)
    y0 = float(surfaces.value(0.0, x0, 0.0))
    j_opt, se_opt = mean_se(opt["reduced"], deterministic)
    j_pert, se_pert = mean_se(pert["reduced"], deterministic)
    diff, diff_se = mean_se(pert["reduced"] - opt["reduced"], deterministic)
    return ProbeResult(
        optimal=j_opt, perturbed=j_pert, difference=diff, difference_se=diff_se,
        optimal_full=mean_se(opt["full"], deterministic)[0],
        perturbed_full=mean_se(pert["full"], deterministic)[0],
        drift_optimal=(j_opt - y0) / m.T, drift_optimal_se=se_opt / m.T,
        drift_perturbed=(j_pert - y0) / m.T, drift_perturbed_se=se_pert / m.T,
    )


@dataclass
class SweepFit:
    """Quadratic fit of the reduced objective against initial wealth.

    ``coef`` holds (a0, a1, a2) of a0 + a1 x + a2 x^2, which correspond to
    (v0, -2 v1, v2) at the origin. Every path's objective is itself
    quadratic in x0 on common paths, so the per-path fits give the
    standard errors directly.
    """

    x: tuple
    objective: tuple
    objective_se: tuple
    coef: tuple
    coef_se: tuple
    r_squared: float

    @property
    def value_coefficients(self) -> tuple[float, float, float]:
        """(v0, v1, v2) implied by the fit."""
        a0, a1, a2 = self.coef
        return a0, -0.5 * a1, a2

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def wealth_sweep(batch: PathBatch, surfaces: ValueSurfaces, c: Claim, m: ModelParams,
                 xs, *, ctx: ProjectionContext = None, deterministic: bool = True) -> SweepFit:
    """Reduced objective under pi* for each initial wealth in ``xs`` on common paths."""
    xs = np.asarray(xs, float)
    if xs.size < 3:
        raise ValueError("need at least three wealth levels")
    ctx = ctx or m.context()
    tab = _Tables(surfaces, c, m, ctx, batch.times)
    R = np.stack([_simulate(batch, surfaces, c, m, x, None, ctx, tab)["reduced"] for x in xs])
    obj = [mean_se(r, deterministic) for r in R]
    per_path = np.linalg.lstsq(np.vander(xs, 3, increasing=True), R, rcond=None)[0]
    coef = [mean_se(a, deterministic) for a in per_path]
    means = np.array([o[0] for o in obj])
    fitted = np.polyval([coef[2][0], coef[1][0], coef[0][0]], xs)
    ss_tot = float(np.sum((means - means.mean()) ** 2))
    r2 = 1.0 - float(np.sum((means - fitted) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return SweepFit(
        x=tuple(map(float, xs)),
        objective=tuple(o[0] for o in obj), objective_se=tuple(o[1] for o in obj),
        coef=tuple(a[0] for a in coef), coef_se=tuple(a[1] for a in coef),
        r_squared=r2,
    )
