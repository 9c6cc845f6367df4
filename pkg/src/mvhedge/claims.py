"""Claims H(w0_T, w_T) and their Gaussian projections onto the observation.

Coordinates: the first payoff argument is the terminal value of the
Brownian motion w0 driving the traded asset, the second the terminal value
of the observed Brownian motion w. With

    w0 = rho * w - sqrt(1 - rho^2) * wperp,

wperp independent of w, the projections reduce to Gaussian expectations:

    H_hat(y)       = E H(rho*y - s*Wperp_T, y)
    E[dH/dx | w_t] = E dH/dx(rho*(y + G) - s*Wperp_T, y + G),  G ~ N(0, T - t)

with s = sqrt(1 - rho^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import hermite_rule, normal_rule

__all__ = [
    "Claim",
    "ProjectionContext",
    "ProjectionOverflowError",
    "MAL_VARIANTS",
    "project_terminal",
    "conditional_dx",
    "project_hperp",
    "correction_integrand",
    "claim_term",
    "conditional_dx_table",
    "make_claim",
    "BUILTIN_CLAIMS",
]

MAL_VARIANTS = ("as_printed", "second_arg_unscaled")


class ProjectionOverflowError(ArithmeticError):
    """The payoff is not finite at some quadrature node."""


Payoff = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Claim:
    """Terminal payoff H(x, y) with x = w0_T and y = w_T.

    ``dpayoff_dx`` may be ``None`` for payoffs without a usable pointwise
    derivative (digitals); the conditional derivative is then computed in
    weak form by Gaussian integration by parts over wperp. ``x_kinks`` and
    ``y_kinks`` list constant locations where H is not smooth in that
    argument; quadrature splits there.
    """

    payoff: Payoff
    dpayoff_dx: Optional[Payoff] = None
    x_kinks: tuple = ()
    y_kinks: tuple = ()
    name: str = "custom"
    square_integrable: bool = True
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "x_kinks", tuple(float(k) for k in self.x_kinks))
        object.__setattr__(self, "y_kinks", tuple(float(k) for k in self.y_kinks))
        if self.square_integrable:
            self._check_second_moment()
        if self.dpayoff_dx is not None:
            self._check_derivative()

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.asarray(self.payoff(x, y), float), x.shape)

    def dx(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.broadcast_to(np.asarray(self.dpayoff_dx(x, y), float), x.shape)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def _check_second_moment(self, n: int = 100_000, seed: int = 0):
        # reference law: independent standard normals (T = 1, rho = 0)
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal((2, n))
        with np.errstate(all="ignore"):
            m2 = float(np.mean(self(x, y) ** 2))
        if not math.isfinite(m2):
            raise ValueError(f"claim {self.name!r}: E H^2 estimate is not finite")

    def _check_derivative(self, h: float = 1e-5):
        xs = np.linspace(-3.0, 3.0, 13) + 0.0137
        ys = np.linspace(-3.0, 3.0, 7) + 0.0071
        x, y = np.meshgrid(xs, ys, indexing="ij")
        if self.x_kinks:
            far = np.min(np.abs(x[..., None] - np.asarray(self.x_kinks)), axis=-1) > 10 * h
            x, y = x[far], y[far]
        fd = (self(x + h, y) - self(x - h, y)) / (2 * h)
        d = self.dx(x, y)
        if not np.allclose(fd, d, rtol=1e-4, atol=1e-4):
            raise ValueError(f"claim {self.name!r}: dpayoff_dx disagrees with finite differences")

    @classmethod
    def from_price_payoff(cls, payoff_s, dpayoff_ds, mu: float, sigma: float, T: float,
                          s_kinks=(), y_kinks=(), name="custom", **kw):
        """Wrap a payoff on (S_T, Y_T) with S_T = mu*T + sigma*w0_T."""
        shift = mu * T

        def payoff(x, y):
            return payoff_s(shift + sigma * x, y)

        deriv = None
        if dpayoff_ds is not None:
            def deriv(x, y):
                return sigma * dpayoff_ds(shift + sigma * x, y)

        x_kinks = tuple((k - shift) / sigma for k in s_kinks)
        return cls(payoff, deriv, x_kinks, tuple(y_kinks), name=name, **kw)


@dataclass(frozen=True)
class ProjectionContext:
    rho: float
    T: float
    quad_nodes: int = 64
    mal_variant: str = "second_arg_unscaled"

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.quad_nodes < 2:
            raise ValueError("quad_nodes must be >= 2")
        if self.mal_variant not in MAL_VARIANTS:
            raise ValueError(f"mal_variant must be one of {MAL_VARIANTS}")

    @property
    def s(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.rho * self.rho))


def _finite(v: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise ProjectionOverflowError(f"non-finite payoff values in {what}")
    return v


def _inner(c: Claim, ctx: ProjectionContext, z: np.ndarray, second: np.ndarray,
           derivative: bool) -> np.ndarray:
    """E over wperp_T of H (or dH/dx) at (rho*z - s*wperp_T, second)."""
    n = ctx.quad_nodes
    scale = ctx.s * math.sqrt(ctx.T)
    mean = ctx.rho * z
    if scale == 0.0:
        if derivative:
            if c.dpayoff_dx is None:
                raise ValueError("weak derivative needs |rho| < 1")
            return c.dx(mean, second)
        return c(mean, second)
    breaks = None
    if c.x_kinks:
        breaks = (mean[..., None] - np.asarray(c.x_kinks)) / scale
    zeta, w = normal_rule(n, breaks, z.shape)
    x = mean[..., None] - scale * zeta
    y2 = np.broadcast_to(second[..., None], x.shape)
    with np.errstate(all="ignore"):
        if not derivative:
            vals = c(x, y2)
        elif c.dpayoff_dx is not None:
            vals = c.dx(x, y2)
        else:
            vals = -zeta * c(x, y2) / scale
    return _finite(np.sum(w * vals, axis=-1), c.name)


def project_terminal(c: Claim, ctx: ProjectionContext, y):
    """H_hat_T(y) = E[H(w0_T, w_T) | w_T = y]."""
    y = np.asarray(y, dtype=float)
    out = _inner(c, ctx, y, y, derivative=False)
    return float(out) if out.ndim == 0 else out


def _second_arg(ctx: ProjectionContext, z):
    return ctx.rho * z if ctx.mal_variant == "as_printed" else z


def conditional_dx(c: Claim, ctx: ProjectionContext, t, y):
    """E[dH/dx(w0_T, w_T) | w_t = y] by tensor-product quadrature."""
    if c.is_zero:
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(y)).shape) + 0.0
    t, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(y, float))
    if np.any(t < 0) or np.any(t > ctx.T * (1 + 1e-12)):
        raise ValueError("t outside [0, T]")
    tau = np.clip(ctx.T - t, 0.0, None)
    n = ctx.quad_nodes
    breaks = None
    if c.y_kinks and np.all(tau > 0):
        k = np.asarray(c.y_kinks)
        if ctx.mal_variant == "as_printed":
            k = k / ctx.rho if ctx.rho != 0 else np.array([])
        if k.size:
            breaks = (k - y[..., None]) / np.sqrt(tau)[..., None]
    eta, w = normal_rule(n, breaks, y.shape)
    z = y[..., None] + np.sqrt(tau)[..., None] * eta
    inner = _inner(c, ctx, z, _second_arg(ctx, z), derivative=True)
    out = np.sum(w * inner, axis=-1)
    return float(out) if out.ndim == 0 else out


def project_hperp(c: Claim, ctx: ProjectionContext, t, y):
    """h_hat_perp(t, y) = -sqrt(1 - rho^2) E[dH/dx | w_t = y]."""
    return -ctx.s * conditional_dx(c, ctx, t, y)


def correction_integrand(c: Claim, ctx: ProjectionContext, sigma: float, t, y):
    """h_tilde(t, y) = sqrt(1 - rho^2) h_hat_perp / sigma = -(1 - rho^2) E[dH/dx | w_t=y] / sigma."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if ctx.s == 0.0:
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(y)).shape) + 0.0
    return ctx.s * project_hperp(c, ctx, t, y) / sigma


def claim_term(c: Claim, ctx: ProjectionContext, t, y):
    """(1 - rho^2) E[dH/dx | w_t = y], the claim term of the optimal strategy."""
    if ctx.s == 0.0 or c.is_zero:
        return np.zeros(np.broadcast(np.asarray(t), np.asarray(y)).shape) + 0.0
    return ctx.s ** 2 * conditional_dx(c, ctx, t, y)


def conditional_dx_table(c: Claim, ctx: ProjectionContext, ts, ys) -> np.ndarray:
    """E[dH/dx | w_t = y] on the tensor grid ts x ys.

    Uses g(z) = E[dH/dx(rho*z - s*wperp_T, z)], tabulated once on a fine
    z grid and splined, then a Gauss-Hermite average of g(y + sqrt(T-t) eta).
    Claims with y-kinks fall back to direct quadrature.
    """
    ts = np.asarray(ts, float)
    ys = np.asarray(ys, float)
    if c.is_zero or (ctx.s == 0.0 and c.dpayoff_dx is None):
        return np.zeros((ts.size, ys.size))
    if c.y_kinks:
        return conditional_dx(c, ctx, ts[:, None], ys[None, :])
    eta, w = hermite_rule(ctx.quad_nodes)
    reach = float(np.max(np.abs(eta))) * math.sqrt(ctx.T) + 0.1
    lo, hi = ys.min() - reach, ys.max() + reach
    h = 0.005 * math.sqrt(ctx.T)
    zg = np.linspace(lo, hi, int(math.ceil((hi - lo) / h)) + 1)
    g = _inner(c, ctx, zg, _second_arg(ctx, zg), derivative=True)
    spline = CubicSpline(zg, g)
    tau = np.clip(ctx.T - ts, 0.0, None)
    out = np.empty((ts.size, ys.size))
    for i, ta in enumerate(tau):
        pts = ys[:, None] + math.sqrt(ta) * eta
        out[i] = spline(pts) @ w
    return out


# ---------------------------------------------------------------- built-ins

def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _underlying(underlying: str, mu: float, sigma: float, T: float):
    """Map (x, y) -> underlying value, its x-derivative, and kink transforms."""
    if underlying in ("w0", "x"):
        return (lambda x, y: x), 1.0, (lambda k: ([k], [])), "x"
    if underlying in ("w", "y"):
        return (lambda x, y: y), 0.0, (lambda k: ([], [k])), "y"
    if underlying == "S":
        return ((lambda x, y: mu * T + sigma * x), sigma,
                (lambda k: ([(k - mu * T) / sigma], [])), "x")
    raise ValueError(f"unknown underlying {underlying!r}")


def make_claim(name: str, *, mu: float = 0.0, sigma: float = 1.0, T: float = 1.0,
               **params) -> Claim:
    """Build a named claim.

    zero                       H = 0
    linear(a=1, b=0, c=0)      H = a x + b y + c
    quadratic(a=1, b=0, c=0)   H = a x^2 + b x y + c y^2
    call/put/digital(strike=0, underlying='w0'|'w'|'S')
    """
    p = dict(params)
    if name == "zero":
        return Claim(_zero, _zero, name="zero", params=p)
    if name == "linear":
        a, b, c0 = float(p.get("a", 1.0)), float(p.get("b", 0.0)), float(p.get("c", 0.0))
        return Claim(lambda x, y: a * x + b * y + c0,
                     lambda x, y: a + 0.0 * x + 0.0 * y, name="linear", params=p)
    if name == "quadratic":
        a, b, c0 = float(p.get("a", 1.0)), float(p.get("b", 0.0)), float(p.get("c", 0.0))
        return Claim(lambda x, y: a * x * x + b * x * y + c0 * y * y,
                     lambda x, y: 2 * a * x + b * y, name="quadratic", params=p)
    if name in ("call", "put", "digital"):
        k = float(p.get("strike", 0.0))
        und, dund, kinks, axis = _underlying(p.get("underlying", "w0"), mu, sigma, T)
        xk, yk = kinks(k)
        if name == "call":
            payoff = lambda x, y: np.maximum(und(x, y) - k, 0.0)  # noqa: E731
            deriv = lambda x, y: dund * (und(x, y) > k)  # noqa: E731
        elif name == "put":
            payoff = lambda x, y: np.maximum(k - und(x, y), 0.0)  # noqa: E731
            deriv = lambda x, y: -dund * (und(x, y) < k)  # noqa: E731
        else:
            payoff = lambda x, y: (und(x, y) > k).astype(float)  # noqa: E731
            # a jump in x has no pointwise derivative; use the weak form
            deriv = None if axis == "x" else _zero
        return Claim(payoff, deriv, tuple(xk), tuple(yk), name=name, params=p)
    raise ValueError(f"unknown claim {name!r}; expected one of {BUILTIN_CLAIMS}")


BUILTIN_CLAIMS = ("zero", "linear", "quadratic", "call", "put", "digital")
