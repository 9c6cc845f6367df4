"""Finite-difference solver for the value coefficients v(2), v(1), v(0).

With the observation y = w_t and a Markovian price of risk theta(t, y), the
coefficients of V^H(t, x) = v0 - 2 v1 x + v2 x^2 solve, backward from T,

    dt v2 + 1/2 v2_yy = A^2 / D,                     v2(T) = 1
    dt v1 + 1/2 v1_yy = A (theta v1 + rho v1_y + q) / D,  v1(T) = H_hat
    dt v0 + 1/2 v0_yy = (theta v1 + rho v1_y + q)^2 / D,  v0(T) = H_hat^2

where A = theta v2 + rho v2_y, D = 1 - rho^2 + rho^2 v2 and
q = (1 - rho^2) E[dH/dx | w_t = y].

Diffusion is Crank-Nicolson; the v2 driver is handled by fixed-point sweeps
on the trapezoidal average, v1 is linear and fully implicit, v0 has a pure
source. The first interval is replaced by two backward-Euler half steps
(Rannacher start) to damp kinked terminal data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded

from .claims import (
    Claim,
    ProjectionContext,
    conditional_dx,
    conditional_dx_table,
    project_terminal,
)
from .quadrature import normal_rule
from .value_coeff import NuQuery, solve_nu

__all__ = [
    "PdeGrid",
    "ValueSurfaces",
    "DivergenceError",
    "DenominatorError",
    "ExtrapolationError",
    "theta_grid",
    "solve_v2",
    "solve_v1",
    "solve_v0",
    "solve_surfaces",
    "closed_form_v1",
]

DEN_FLOOR = 1e-10
BOUNDARIES = ("natural", "neumann", "linear", "quadratic")

ThetaFn = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]


class DivergenceError(RuntimeError):
    """Fixed-point sweeps failed to converge within one time step."""


class ExtrapolationError(ValueError):
    """A query point lies outside the surface domain."""


class DenominatorError(RuntimeError):
    """1 - rho^2 + rho^2 v2 dropped below the floor."""


@dataclass(frozen=True)
class PdeGrid:
    T: float
    t_nodes: int = 400
    y_min: float = -6.0
    y_max: float = 6.0
    y_nodes: int = 401
    boundary: str = "natural"

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.y_min < self.y_max:
            raise ValueError("y_min must be below y_max")
        if self.t_nodes < 2:
            raise ValueError("t_nodes must be >= 2")
        if self.y_nodes < 3:
            raise ValueError("y_nodes must be >= 3")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")

    @classmethod
    def centered(cls, T: float, width: float = 6.0, **kw) -> "PdeGrid":
        """Grid on y in [-width sqrt(T), width sqrt(T)]."""
        half = width * math.sqrt(T)
        return cls(T=T, y_min=-half, y_max=half, **kw)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.t_nodes)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.y_nodes)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.y_nodes - 1)

    def refined(self) -> "PdeGrid":
        return replace(self, t_nodes=2 * self.t_nodes - 1, y_nodes=2 * self.y_nodes - 1)


def theta_grid(theta: ThetaFn, t, y) -> np.ndarray:
    """theta evaluated on the tensor grid t x y."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    shape = (t.size, y.size)
    if not callable(theta):
        return np.full(shape, float(theta))
    val = np.asarray(theta(t[:, None], y[None, :]), float)
    return np.array(np.broadcast_to(val, shape))


# ------------------------------------------------------------- operators

class _Band:
    """Five-diagonal operator; ``d[k][i]`` multiplies v[i + k - 2] in row i."""

    def __init__(self, d):
        self.d = d

    @classmethod
    def tri(cls, sub, diag, sup):
        n = diag.size
        z = np.zeros(n)
        return cls(np.array([z, sub, diag, sup, z.copy()]))

    def __matmul__(self, v):
        out = self.d[2] * v
        for k in (1, 0):
            o = 2 - k
            out[o:] += self.d[k, o:] * v[:-o]
        for k in (3, 4):
            o = k - 2
            out[:-o] += self.d[k, :-o] * v[o:]
        return out

    def lincomb(self, a, b, other=None):
        """a*I + b*self (+ other), with a, b scalars or arrays."""
        d = b * self.d
        d[2] = d[2] + a
        if other is not None:
            d = d + other.d
        return _Band(d)

    def scaled_rows(self, r):
        return _Band(r * self.d)

    def mean(self, other):
        return _Band(0.5 * (self.d + other.d))

    def solve(self, rhs):
        n = self.d.shape[1]
        ab = np.zeros((5, n))
        for k in range(5):
            o = k - 2
            # row i, column i + o lives at ab[2 - o, i + o]
            if o >= 0:
                ab[2 - o, o:] = self.d[k, : n - o]
            else:
                ab[2 - o, : n + o] = self.d[k, -o:]
        return solve_banded((2, 2), ab, rhs, check_finite=False)


# ghost node beyond each edge as weights on (edge, next, next-but-one)
_GHOSTS = {
    "neumann": (0.0, 1.0, 0.0),     # zero slope
    "linear": (2.0, -1.0, 0.0),     # zero curvature, exact for affine growth
    "quadratic": (3.0, -3.0, 1.0),  # zero third difference, exact for quadratic growth
}
# per-coefficient ghosts of the growth-matched boundary
_NATURAL = {"v2": "neumann", "v1": "linear", "v0": "quadratic"}


def _ghost_kind(boundary: str, which: str) -> str:
    return _NATURAL[which] if boundary == "natural" else boundary


def _operators(n: int, dy: float, kind: str) -> tuple[_Band, _Band]:
    """Second- and first-difference operators with ghost-node boundaries."""
    g = _GHOSTS[kind]
    inv2 = 1.0 / dy ** 2
    lap = _Band.tri(np.full(n, inv2), np.full(n, -2 * inv2), np.full(n, inv2))
    h = 0.5 / dy
    d1 = _Band.tri(np.full(n, -h), np.zeros(n), np.full(n, h))
    for j, w in enumerate(g):
        # left edge: ghost enters row 0 with +inv2 (lap) and -h (d1)
        lap.d[2 + j, 0] += w * inv2
        d1.d[2 + j, 0] += -w * h
        # right edge, mirrored
        lap.d[2 - j, -1] += w * inv2
        d1.d[2 - j, -1] += w * h
    lap.d[1, 0] = lap.d[3, -1] = 0.0
    d1.d[1, 0] = d1.d[3, -1] = 0.0
    return lap, d1


def _steps(t: np.ndarray):
    """Backward stepping plan: (n, dt, rannacher) from the last interval down."""
    for n in range(t.size - 2, -1, -1):
        yield n, t[n + 1] - t[n], n == t.size - 2


def _den(rho2: float, v2: np.ndarray) -> np.ndarray:
    den = 1.0 - rho2 + rho2 * v2
    if np.min(den) < DEN_FLOOR:
        raise DenominatorError(f"1 - rho^2 + rho^2 v2 = {np.min(den):.3e} below floor")
    return den


# ------------------------------------------------------------- solvers

def solve_v2(theta: ThetaFn, rho: float, grid: PdeGrid, *, tol: float = 1e-10,
             max_sweeps: int = 50) -> np.ndarray:
    """Solve the v(2) equation on ``grid``; returns an array (t_nodes, y_nodes)."""
    t, y = grid.t, grid.y
    th = theta_grid(theta, t, y)
    rho2 = rho * rho
    lap, d1 = _operators(y.size, grid.dy, _ghost_kind(grid.boundary, "v2"))

    def driver(v, th_row):
        a = th_row * v + rho * (d1 @ v)
        return a * a / _den(rho2, v)

    def implicit(rhs_const, h_impl, h_drv, th_row, v0):
        # solve (I - h_impl L) v = rhs_const - h_drv F(v) by fixed point
        mat = lap.lincomb(1.0, -h_impl)
        v = v0
        for _ in range(max_sweeps):
            new = mat.solve(rhs_const - h_drv * driver(v, th_row))
            if np.max(np.abs(new - v)) < tol:
                return new
            v = new
        raise DivergenceError("v(2) fixed-point sweeps did not converge")

    out = np.empty((t.size, y.size))
    out[-1] = 1.0
    for n, dt, start in _steps(t):
        v_next = out[n + 1]
        if start:
            h = dt / 2
            th_mid = 0.5 * (th[n] + th[n + 1])
            v_mid = implicit(v_next, h / 2, h, th_mid, v_next)
            out[n] = implicit(v_mid, h / 2, h, th[n], v_mid)
        else:
            rhs = lap.lincomb(1.0, dt / 4) @ v_next - dt / 2 * driver(v_next, th[n + 1])
            out[n] = implicit(rhs, dt / 4, dt / 2, th[n], v_next)
    if np.any(out <= 0) or np.any(out > 1.0 + 1e-9):
        raise DivergenceError("v(2) left (0, 1]")
    return out


def _claim_data(c: Claim, ctx: ProjectionContext, grid: PdeGrid):
    t, y = grid.t, grid.y
    terminal = np.asarray(project_terminal(c, ctx, y), float)
    if ctx.s == 0.0:
        q = np.zeros((t.size, y.size))
    else:
        q = ctx.s ** 2 * conditional_dx_table(c, ctx, t, y)
    return terminal, q


def _ctx(rho: float, grid: PdeGrid, ctx):
    return ctx if ctx is not None else ProjectionContext(rho, grid.T)


def solve_v1(c: Claim, theta: ThetaFn, rho: float, grid: PdeGrid, v2: np.ndarray,
             *, ctx: ProjectionContext = None, _claim=None) -> np.ndarray:
    """Solve the linear v(1) equation given v(2) on the same grid."""
    ctx = _ctx(rho, grid, ctx)
    t, y = grid.t, grid.y
    terminal, q = _claim if _claim is not None else _claim_data(c, ctx, grid)
    th = theta_grid(theta, t, y)
    rho2 = rho * rho
    lap, d1 = _operators(y.size, grid.dy, _ghost_kind(grid.boundary, "v1"))
    _, d1_v2 = _operators(y.size, grid.dy, _ghost_kind(grid.boundary, "v2"))

    def coeffs(k):
        a = (th[k] * v2[k] + rho * (d1_v2 @ v2[k])) / _den(rho2, v2[k])
        # K = -1/2 L + a*theta I + a*rho D1
        K = lap.lincomb(a * th[k], -0.5, d1.scaled_rows(a * rho))
        return K, a * q[k]

    out = np.empty((t.size, y.size))
    out[-1] = terminal
    K1, s1 = coeffs(t.size - 1)
    for n, dt, start in _steps(t):
        K0, s0 = coeffs(n)
        v_next = out[n + 1]
        if start:
            h = dt / 2
            Km = K0.mean(K1)
            v_mid = Km.lincomb(1.0, h).solve(v_next - h * 0.5 * (s0 + s1))
            out[n] = K0.lincomb(1.0, h).solve(v_mid - h * s0)
        else:
            rhs = K1.lincomb(1.0, -dt / 2) @ v_next - dt / 2 * (s0 + s1)
            out[n] = K0.lincomb(1.0, dt / 2).solve(rhs)
        K1, s1 = K0, s0
    return out


def solve_v0(c: Claim, theta: ThetaFn, rho: float, grid: PdeGrid, v2: np.ndarray,
             v1: np.ndarray, *, ctx: ProjectionContext = None, _claim=None) -> np.ndarray:
    """Solve the v(0) equation (pure source term) given v(2), v(1)."""
    ctx = _ctx(rho, grid, ctx)
    t, y = grid.t, grid.y
    terminal, q = _claim if _claim is not None else _claim_data(c, ctx, grid)
    th = theta_grid(theta, t, y)
    rho2 = rho * rho
    lap, _ = _operators(y.size, grid.dy, _ghost_kind(grid.boundary, "v0"))
    _, d1 = _operators(y.size, grid.dy, _ghost_kind(grid.boundary, "v1"))

    def source(k):
        b = th[k] * v1[k] + rho * (d1 @ v1[k]) + q[k]
        return b * b / _den(rho2, v2[k])

    out = np.empty((t.size, y.size))
    out[-1] = terminal ** 2
    s1 = source(t.size - 1)
    for n, dt, start in _steps(t):
        s0 = source(n)
        v_next = out[n + 1]
        if start:
            h = dt / 2
            mat = lap.lincomb(1.0, -h / 2)
            v_mid = mat.solve(v_next - h * 0.5 * (s0 + s1))
            out[n] = mat.solve(v_mid - h * s0)
        else:
            rhs = lap.lincomb(1.0, dt / 4) @ v_next - dt / 2 * (s0 + s1)
            out[n] = lap.lincomb(1.0, -dt / 4).solve(rhs)
        s1 = s0
    return out


# ------------------------------------------------------------- surfaces

@dataclass(frozen=True)
class ValueSurfaces:
    """Value coefficients and their y-derivatives on a (t, y) grid."""

    t: np.ndarray
    y: np.ndarray
    v2: np.ndarray
    v1: np.ndarray
    v0: np.ndarray
    z2: np.ndarray
    z1: np.ndarray
    rho: float
    T: float

    def __post_init__(self):
        for name in ("t", "y", "v2", "v1", "v0", "z2", "z1"):
            getattr(self, name).setflags(write=False)

    @classmethod
    def from_values(cls, grid: PdeGrid, rho: float, v2, v1, v0) -> "ValueSurfaces":
        dy = grid.dy
        z2 = np.gradient(v2, dy, axis=1, edge_order=2)
        z1 = np.gradient(v1, dy, axis=1, edge_order=2)
        return cls(grid.t, grid.y, v2, v1, v0, z2, z1, float(rho), grid.T)

    def contains(self, t, y) -> np.ndarray:
        t, y = np.asarray(t), np.asarray(y)
        return (t >= self.t[0]) & (t <= self.t[-1]) & (y >= self.y[0]) & (y <= self.y[-1])

    def interp(self, name: str, t, y):
        """Bilinear interpolation of surface ``name`` at (t, y)."""
        field = getattr(self, name)
        t = np.asarray(t, float)
        y = np.asarray(y, float)
        if not np.all(self.contains(t, y)):
            raise ExtrapolationError("(t, y) outside the surface domain")
        ti = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 2)
        yi = np.clip(np.searchsorted(self.y, y, side="right") - 1, 0, self.y.size - 2)
        ft = (t - self.t[ti]) / (self.t[ti + 1] - self.t[ti])
        fy = (y - self.y[yi]) / (self.y[yi + 1] - self.y[yi])
        val = ((1 - ft) * (1 - fy) * field[ti, yi] + ft * (1 - fy) * field[ti + 1, yi]
               + (1 - ft) * fy * field[ti, yi + 1] + ft * fy * field[ti + 1, yi + 1])
        return float(val) if val.ndim == 0 else val

    def value(self, t, x, y):
        """V^H(t, x) = v0 - 2 v1 x + v2 x^2 at observation y."""
        v0, v1, v2 = (self.interp(k, t, y) for k in ("v0", "v1", "v2"))
        return v0 - 2 * v1 * x + v2 * x * x

    def to_csv(self, path) -> Path:
        path = Path(path)
        tt, yy = np.meshgrid(self.t, self.y, indexing="ij")
        cols = [tt, yy, self.v2, self.v1, self.v0, self.z2, self.z1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "y", "v2", "v1", "v0", "z2", "z1"])
            for row in zip(*(c.ravel() for c in cols)):
                w.writerow([repr(float(v)) for v in row])
        return path


def solve_surfaces(c: Claim, theta: ThetaFn, ctx: ProjectionContext, grid: PdeGrid,
                   **kw) -> ValueSurfaces:
    """Solve v(2), v(1), v(0) for claim ``c`` and wrap them as surfaces."""
    if not math.isclose(ctx.T, grid.T):
        raise ValueError("projection context and grid disagree on T")
    v2 = solve_v2(theta, ctx.rho, grid, **kw)
    data = _claim_data(c, ctx, grid)
    v1 = solve_v1(c, theta, ctx.rho, grid, v2, ctx=ctx, _claim=data)
    v0 = solve_v0(c, theta, ctx.rho, grid, v2, v1, ctx=ctx, _claim=data)
    return ValueSurfaces.from_values(grid, ctx.rho, v2, v1, v0)


# ------------------------------------------------------------- closed form

def closed_form_v1(c: Claim, theta0: float, rho: float, T: float, t: float, y: float, *,
                   quad_nodes: int = 64, time_intervals: int = 200,
                   mal_variant: str = "second_arg_unscaled") -> float:
    """v(1)(t, y) for constant theta by Feynman-Kac with a Girsanov drift.

    With nu_s = nu(rho, 1 - rho^2 + theta^2 (T - s)) and D_s = 1 - rho^2 + rho^2 nu_s,

        v1(t, y) = nu_t E H_hat(y + (rho/theta) ln nu_t + G)
                   - (1 - rho^2) theta nu_t int_t^T E[dH/dx | w_t = y_s] / D_s ds,

    y_s = y + (rho/theta) ln(nu_t / nu_s), G ~ N(0, T - t). The shift terms
    are zero when theta = 0. The time integral uses composite Simpson.
    """
    ctx = ProjectionContext(rho, T, quad_nodes, mal_variant)
    rho2 = rho * rho

    def nu(s):
        return solve_nu(NuQuery(abs(rho), 1.0 - rho2 + theta0 ** 2 * (T - s)))

    nu_t = nu(t)
    shift = (rho / theta0) * math.log(nu_t) if theta0 != 0 else 0.0
    tau = T - t
    centre = y + shift
    breaks = None
    if c.y_kinks and tau > 0:
        breaks = (np.asarray(c.y_kinks) - centre) / math.sqrt(tau)
    eta, w = normal_rule(quad_nodes, breaks)
    first = nu_t * float(w @ project_terminal(c, ctx, centre + math.sqrt(tau) * eta))
    if theta0 == 0 or ctx.s == 0.0 or tau == 0:
        return first
    n = time_intervals + (time_intervals % 2)
    ss = np.linspace(t, T, n + 1)
    vals = np.empty_like(ss)
    for i, s in enumerate(ss):
        nu_s = nu(s)
        ys = y + (rho / theta0) * math.log(nu_t / nu_s)
        vals[i] = conditional_dx(c, ctx, t, ys) / (1.0 - rho2 + rho2 * nu_s)
    second = -(1.0 - rho2) * theta0 * nu_t * integrate.simpson(vals, x=ss)
    return first + second
