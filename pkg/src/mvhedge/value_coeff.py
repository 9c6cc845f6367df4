"""Value coefficient V(2) for a deterministic market price of risk.

When theta is deterministic the quadratic coefficient of the value function
does not depend on the observation and solves

    dV/dt = theta_t^2 V^2 / (1 - rho^2 + rho^2 V),    V(T) = 1,

whose solution is V_t = nu(rho, 1 - rho^2 + int_t^T theta_s^2 ds), with
nu(rho, alpha) the positive root of (1 - rho^2)/x - rho^2 ln x = alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "NuQuery",
    "DeterministicTheta",
    "NuDomainError",
    "NuConvergenceError",
    "OdeStepError",
    "nu_residual",
    "solve_nu",
    "v2_closed_form",
    "v2_ode",
]

ROOT_TOL = 1e-12
QUAD_RTOL = 1e-10
MAX_BRACKET_EXPANSIONS = 200


class NuDomainError(ValueError):
    """alpha lies outside the range of f(x) = (1-rho^2)/x - rho^2 ln x."""


class NuConvergenceError(RuntimeError):
    pass


class OdeStepError(RuntimeError):
    pass


@dataclass(frozen=True)
class NuQuery:
    rho: float
    alpha: float

    def __post_init__(self):
        r = abs(float(self.rho))
        if r > 1.0 or not math.isfinite(r):
            raise NuDomainError(f"|rho| must lie in [0, 1], got {self.rho}")
        if not math.isfinite(self.alpha):
            raise NuDomainError(f"alpha must be finite, got {self.alpha}")
        if r == 0.0 and self.alpha <= 0.0:
            raise NuDomainError(f"rho = 0 requires alpha > 0, got {self.alpha}")


def nu_residual(rho: float, x: float) -> float:
    """f(x) = (1 - rho^2)/x - rho^2 ln x."""
    r2 = rho * rho
    return (1.0 - r2) / x - r2 * math.log(x)


def solve_nu(q: NuQuery, tol: float = ROOT_TOL) -> float:
    """Positive root x* of (1 - rho^2)/x - rho^2 ln x = alpha.

    The equation is solved for u = ln x, where it reads
    g(u) = (1 - rho^2) e^{-u} - rho^2 u - alpha, strictly decreasing in u.
    A geometric bracket expansion around u = 0 is followed by Brent's
    method and a Newton polish. The returned root satisfies
    ``|f(x*) - alpha| <= tol * max(1, |alpha|)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    r2 = float(q.rho) ** 2
    a = float(q.alpha)
    if r2 == 0.0:
        if a <= 0.0:
            raise NuDomainError(f"rho^2 underflows to 0 and alpha={a} <= 0; no positive root")
        return 1.0 / a
    if r2 == 1.0:
        x = math.exp(-a)
        if x == 0.0:
            raise NuConvergenceError(f"root underflows for alpha={a}")
        return x

    def g(u):
        return (1.0 - r2) * math.exp(-u) - r2 * u - a

    lo, hi, step = -1.0, 1.0, 1.0
    for _ in range(MAX_BRACKET_EXPANSIONS):
        try:
            glo, ghi = g(lo), g(hi)
        except OverflowError:
            raise NuConvergenceError(f"bracket overflow for alpha={a}") from None
        if glo >= 0.0 >= ghi:
            break
        step *= 2.0
        if glo < 0.0:
            lo -= step
        if ghi > 0.0:
            hi += step
    else:
        raise NuConvergenceError(f"bracket expansion cap reached for alpha={a}")

    u = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        du = g(u) / (-(1.0 - r2) * math.exp(-u) - r2)
        u -= du
        if abs(du) < 1e-16 * max(1.0, abs(u)):
            break
    try:
        x = math.exp(u)
    except OverflowError:
        raise NuConvergenceError(f"root overflows for alpha={a}") from None
    if x == 0.0:
        raise NuConvergenceError(f"root underflows for alpha={a}")
    if abs(nu_residual(q.rho, x) - a) > tol * max(1.0, abs(a)):
        raise NuConvergenceError(f"residual above tolerance for alpha={a}")
    return x


ThetaLike = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class DeterministicTheta:
    """Deterministic market price of risk theta_t = mu_t / sigma_t on [0, T]."""

    theta: ThetaLike
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def is_constant(self) -> bool:
        return not callable(self.theta)

    def __call__(self, t):
        if self.is_constant:
            return np.full_like(np.asarray(t, dtype=float), float(self.theta))
        return np.vectorize(self.theta, otypes=[float])(t)

    def tradeoff(self, t: float) -> float:
        """Remaining mean-variance tradeoff int_t^T theta_s^2 ds."""
        if not 0.0 <= t <= self.T:
            raise ValueError(f"t={t} outside [0, {self.T}]")
        if self.is_constant:
            return float(self.theta) ** 2 * (self.T - t)
        val, _ = integrate.quad(
            lambda s: self.theta(s) ** 2, t, self.T, epsabs=0.0, epsrel=QUAD_RTOL, limit=200
        )
        return val


def v2_closed_form(m: DeterministicTheta, rho: float, t, tol: float = ROOT_TOL):
    """V_t(2) = nu(rho, 1 - rho^2 + int_t^T theta^2 ds); scalar or array ``t``."""
    r2 = float(rho) ** 2
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([solve_nu(NuQuery(abs(rho), 1.0 - r2 + m.tradeoff(s)), tol) for s in ts])
    return float(out[0]) if np.ndim(t) == 0 else out.reshape(np.shape(t))


def _v2_rhs(theta2: float, r2: float, v: float) -> float:
    return theta2 * v * v / (1.0 - r2 + r2 * v)


def v2_ode(m: DeterministicTheta, rho: float, grid, n_steps: int = 1000) -> np.ndarray:
    """Integrate the V(2) ODE backward from V_T = 1 with classical RK4.

    ``grid`` is an increasing array of times whose last node is T. About
    ``n_steps`` RK4 steps are spread over [grid[0], T]; every interval
    between consecutive grid nodes receives at least one step.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing 1-D array")
    if not math.isclose(grid[-1], m.T, rel_tol=0, abs_tol=1e-14 * max(1.0, m.T)):
        raise ValueError("grid must end at T")
    r2 = float(rho) ** 2
    span = m.T - grid[0]
    h_target = span / n_steps if span > 0 else 1.0
    if span > 0 and h_target < 1e-14 * m.T:
        raise OdeStepError("step size underflow")

    def th2(s):
        return float(m(s)) ** 2

    out = np.empty_like(grid)
    v = 1.0
    out[-1] = v
    for i in range(grid.size - 1, 0, -1):
        t1, t0 = grid[i], grid[i - 1]
        k = max(1, math.ceil((t1 - t0) / h_target - 1e-9))
        h = (t1 - t0) / k
        t = t1
        for _ in range(k):
            # backward in time: dv/d(-t) = -rhs
            k1 = -_v2_rhs(th2(t), r2, v)
            k2 = -_v2_rhs(th2(t - h / 2), r2, v + h / 2 * k1)
            k3 = -_v2_rhs(th2(t - h / 2), r2, v + h / 2 * k2)
            k4 = -_v2_rhs(th2(t - h), r2, v + h * k3)
            v += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t -= h
        out[i - 1] = v
    if np.any(out <= 0) or np.any(out > 1.0 + 1e-14):
        raise OdeStepError("V(2) left (0, 1]")
    return out
