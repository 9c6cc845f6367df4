"""Dynamic-programming oracle on a recombining binomial lattice for w.

Each step moves the observation by +-sqrt(dt) with probability 1/2. The
filtered wealth moves by pi * sigma (theta dt + rho dw) and every step
accrues (pi^2 (1 - rho^2) + 2 pi h_tilde) sigma^2 dt; the terminal cost is
(x_T - H_hat_T(y_T))^2.

Two solvers are provided. The quadratic mode carries the value at each node
as c2 x^2 - 2 c1 x + c0 and minimizes the one-step quadratic in pi in closed
form. The exhaustive mode searches a finite control grid at each node and
each point of a wealth grid, interpolating the next-step value linearly in
x; it makes no structural assumption and serves as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .claims import Claim, ProjectionContext, correction_integrand, project_terminal
from .montecarlo import ModelParams

__all__ = [
    "LatticeSpec",
    "LatticePolicy",
    "ControlGridError",
    "dp_value",
    "dp_policy",
    "dp_coefficients",
    "MAX_EXHAUSTIVE_STEPS",
]

MAX_EXHAUSTIVE_STEPS = 12


class ControlGridError(ValueError):
    """The exhaustive search selected a control on the edge of the grid."""


@dataclass(frozen=True)
class LatticeSpec:
    n_steps: int = 12
    mode: str = "quadratic"  # or "exhaustive"
    control_grid: Optional[tuple] = None
    x_grid: Optional[tuple] = None
    quad_nodes: int = 64
    mal_variant: str = "second_arg_unscaled"
    y_branching: int = field(default=2, init=False)

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.mode not in ("quadratic", "exhaustive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "exhaustive":
            if self.n_steps > MAX_EXHAUSTIVE_STEPS:
                raise ValueError(f"exhaustive mode supports n_steps <= {MAX_EXHAUSTIVE_STEPS}")
            if self.control_grid is None or self.x_grid is None:
                raise ValueError("exhaustive mode needs control_grid and x_grid")
            u = np.sort(np.asarray(self.control_grid, float))
            if u.size < 3 or not np.allclose(u, -u[::-1], atol=1e-12):
                raise ValueError("control_grid must be symmetric about 0")
            xg = np.asarray(self.x_grid, float)
            if xg.size < 2 or np.any(np.diff(xg) <= 0):
                raise ValueError("x_grid must be strictly increasing with >= 2 points")

    @classmethod
    def exhaustive(cls, n_steps: int, pi_max: float = 8.0, n_controls: int = 1601,
                   x_max: float = 4.0, n_x: int = 161, **kw) -> "LatticeSpec":
        return cls(n_steps, "exhaustive", tuple(np.linspace(-pi_max, pi_max, n_controls)),
                   tuple(np.linspace(-x_max, x_max, n_x)), **kw)

    def nodes(self, T: float, k: int) -> np.ndarray:
        """Observation values at time step k."""
        return (2.0 * np.arange(k + 1) - k) * math.sqrt(T / self.n_steps)


@dataclass(frozen=True)
class LatticePolicy:
    """Per-node optimal controls.

    In quadratic mode the control is affine in wealth,
    pi = intercept[k][j] - slope[k][j] * x. In exhaustive mode ``controls[k]``
    holds the argmin over the control grid at each (node j, x_grid[i]).
    """

    times: np.ndarray
    y: tuple
    slope: Optional[tuple] = None
    intercept: Optional[tuple] = None
    controls: Optional[tuple] = None
    x_grid: Optional[np.ndarray] = None

    def control(self, k: int, j: int, x):
        if self.slope is not None:
            return self.intercept[k][j] - self.slope[k][j] * np.asarray(x, float)
        return np.interp(x, self.x_grid, self.controls[k][j])


def _step_data(spec: LatticeSpec, m: ModelParams, c: Claim, ctx: ProjectionContext, k: int):
    dt = m.T / spec.n_steps
    t = k * dt
    y = spec.nodes(m.T, k)
    th = np.asarray(m.price_of_risk(t, y), float)
    sq = math.sqrt(dt)
    up = m.sigma * (th * dt + m.rho * sq)
    dn = m.sigma * (th * dt - m.rho * sq)
    if c.is_zero or ctx.s == 0.0:
        ht = np.zeros_like(y)
    else:
        ht = np.asarray(correction_integrand(c, ctx, m.sigma, t, y), float)
    return dt, up, dn, ht


def _terminal(spec, m, c, ctx):
    yT = spec.nodes(m.T, spec.n_steps)
    return np.asarray(project_terminal(c, ctx, yT), float) * np.ones_like(yT)


def _quadratic(spec: LatticeSpec, m: ModelParams, c: Claim):
    ctx = ProjectionContext(m.rho, m.T, spec.quad_nodes, spec.mal_variant)
    hT = _terminal(spec, m, c, ctx)
    c2, c1, c0 = np.ones_like(hT), hT.copy(), hT * hT
    slopes, intercepts = [None] * spec.n_steps, [None] * spec.n_steps
    s2 = m.sigma ** 2
    for k in range(spec.n_steps - 1, -1, -1):
        dt, up, dn, ht = _step_data(spec, m, c, ctx, k)
        c2u, c2d, c1u, c1d, c0u, c0d = c2[1:], c2[:-1], c1[1:], c1[:-1], c0[1:], c0[:-1]
        A = 0.5 * (c2u * up * up + c2d * dn * dn) + (1 - m.rho ** 2) * s2 * dt
        a = 0.5 * (c2u * up + c2d * dn)
        b = 0.5 * (c1u * up + c1d * dn) - ht * s2 * dt
        slopes[k], intercepts[k] = a / A, b / A
        c2 = 0.5 * (c2u + c2d) - a * a / A
        c1 = 0.5 * (c1u + c1d) - a * b / A
        c0 = 0.5 * (c0u + c0d) - b * b / A
    return (float(c2[0]), float(c1[0]), float(c0[0])), slopes, intercepts


def _interp_lin(xg: np.ndarray, vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation in x along the last axis, linear beyond the ends."""
    n = xg.size
    i = np.clip(np.searchsorted(xg, x) - 1, 0, n - 2)
    f = (x - xg[i]) / (xg[i + 1] - xg[i])
    lo = np.take_along_axis(vals, i, axis=-1)
    hi = np.take_along_axis(vals, i + 1, axis=-1)
    return lo + f * (hi - lo)


def _exhaustive(spec: LatticeSpec, m: ModelParams, c: Claim, strict: bool = True):
    ctx = ProjectionContext(m.rho, m.T, spec.quad_nodes, spec.mal_variant)
    xg = np.asarray(spec.x_grid, float)
    # order by |pi| so argmin breaks ties toward the smaller control
    u = np.asarray(spec.control_grid, float)
    u = u[np.lexsort((u, np.abs(u)))]
    edge = np.abs(u) >= np.abs(u).max() - 1e-15
    hT = _terminal(spec, m, c, ctx)
    V = (xg[None, :] - hT[:, None]) ** 2  # (nodes, nx)
    controls = [None] * spec.n_steps
    boundary_hits = 0
    s2 = m.sigma ** 2
    for k in range(spec.n_steps - 1, -1, -1):
        dt, up, dn, ht = _step_data(spec, m, c, ctx, k)
        n = k + 1
        # candidate next wealth, shape (node, nx, control)
        xu = xg[None, :, None] + u[None, None, :] * up[:, None, None]
        xd = xg[None, :, None] + u[None, None, :] * dn[:, None, None]
        vu = _interp_lin(xg, np.broadcast_to(V[1:, None, :], (n, xg.size, xg.size)),
                         xu)
        vd = _interp_lin(xg, np.broadcast_to(V[:-1, None, :], (n, xg.size, xg.size)),
                         xd)
        cost = (u * u * (1 - m.rho ** 2))[None, :] + 2 * u[None, :] * ht[:, None]
        obj = 0.5 * (vu + vd) + (cost * s2 * dt)[:, None, :]
        best = np.argmin(obj, axis=-1)
        boundary_hits += int(np.count_nonzero(edge[best]))
        controls[k] = u[best]
        V = np.take_along_axis(obj, best[..., None], axis=-1)[..., 0]
    if strict and boundary_hits:
        raise ControlGridError(f"{boundary_hits} node(s) selected a boundary control; "
                               "widen control_grid")
    return xg, V[0], controls, boundary_hits


def dp_coefficients(spec: LatticeSpec, m: ModelParams, c: Claim) -> tuple[float, float, float]:
    """(c2, c1, c0) at the root, value = c2 x^2 - 2 c1 x + c0 (quadratic mode)."""
    if spec.mode != "quadratic":
        raise ValueError("coefficients are only available in quadratic mode")
    return _quadratic(spec, m, c)[0]


def dp_value(spec: LatticeSpec, m: ModelParams, c: Claim, x, *, strict: bool = True):
    """Lattice value at t = 0, y = 0 and wealth ``x`` (scalar or array)."""
    xa = np.asarray(x, float)
    if spec.mode == "quadratic":
        c2, c1, c0 = _quadratic(spec, m, c)[0]
        out = c2 * xa * xa - 2 * c1 * xa + c0
    else:
        xg, v, _, _ = _exhaustive(spec, m, c, strict)
        if np.any((xa < xg[0]) | (xa > xg[-1])):
            raise ValueError("x outside x_grid")
        out = np.interp(xa, xg, v)
    return float(out) if out.ndim == 0 else out


def dp_policy(spec: LatticeSpec, m: ModelParams, c: Claim, *, strict: bool = True) -> LatticePolicy:
    """Optimal controls at every lattice node."""
    times = np.arange(spec.n_steps) * (m.T / spec.n_steps)
    ys = tuple(spec.nodes(m.T, k) for k in range(spec.n_steps))
    if spec.mode == "quadratic":
        _, slopes, intercepts = _quadratic(spec, m, c)
        return LatticePolicy(times, ys, slope=tuple(slopes), intercept=tuple(intercepts))
    xg, _, controls, _ = _exhaustive(spec, m, c, strict)
    return LatticePolicy(times, ys, controls=tuple(controls), x_grid=xg)
