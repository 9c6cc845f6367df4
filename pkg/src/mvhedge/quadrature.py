"""Expectations under a standard normal law.

Smooth integrands use Gauss-Hermite nodes. Integrands with known kinks or
jumps are integrated piecewise with Gauss-Legendre on [-L, L] split at the
breakpoints, which keeps the rule exact-to-roundoff on each smooth piece.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

TAIL = 10.0  # P(|Z| > 10) ~ 1.5e-23
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@lru_cache(maxsize=32)
def hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights with sum(w f(z)) ~ E f(Z), Z ~ N(0, 1)."""
    z, w = np.polynomial.hermite_e.hermegauss(n)
    return z, w * _INV_SQRT_2PI


@lru_cache(maxsize=32)
def _legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def split_rule(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise Gauss-Legendre rule for E f(Z) with per-row breakpoints.

    ``breaks`` has shape (..., m) in standard-normal units. Returns nodes and
    weights of shape (..., (m + 1) * n). Breakpoints beyond +-TAIL are
    clipped, which yields zero-length (zero-weight) pieces.
    """
    b = np.clip(np.sort(np.asarray(breaks, dtype=float), axis=-1), -TAIL, TAIL)
    lead = b.shape[:-1]
    lo = np.full(lead + (1,), -TAIL)
    hi = np.full(lead + (1,), TAIL)
    edges = np.concatenate([lo, b, hi], axis=-1)
    a, c = edges[..., :-1], edges[..., 1:]
    x, w = _legendre_rule(n)
    half = 0.5 * (c - a)
    mid = 0.5 * (c + a)
    z = mid[..., None] + half[..., None] * x
    wt = half[..., None] * w * np.exp(-0.5 * z * z) * _INV_SQRT_2PI
    shape = lead + (-1,)
    return z.reshape(shape), wt.reshape(shape)


def normal_rule(n: int, breaks=None, lead_shape=()) -> tuple[np.ndarray, np.ndarray]:
    """Hermite rule broadcast to ``lead_shape``, or a split rule if breaks given."""
    if breaks is None or np.shape(breaks)[-1] == 0:
        z, w = hermite_rule(n)
        shape = tuple(lead_shape) + (n,)
        return np.broadcast_to(z, shape), np.broadcast_to(w, shape)
    return split_rule(breaks, n)
