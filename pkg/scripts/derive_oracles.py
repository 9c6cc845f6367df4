"""Recompute the frozen reference values used by the test suite.

Deliberately independent of the ``mvhedge`` package: root finding by plain
bisection, expectations by brute-force sampling with numpy. The printed
values are frozen in tests/oracles.py; rerun this script only to audit them.

    python scripts/derive_oracles.py
"""

import math

import numpy as np
from scipy import integrate

SEED = 20261016
N = 10_000_000


def nu_bisect(rho, alpha, lo=1e-12, hi=1e12, iters=400):
    f = lambda x: (1 - rho**2) / x - rho**2 * math.log(x) - alpha  # noqa: E731
    for _ in range(iters):
        mid = math.sqrt(lo * hi)  # geometric: the bracket spans 24 decades
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def mc_mean(samples):
    return samples.mean(), samples.std(ddof=1) / math.sqrt(samples.size)


def main():
    rng = np.random.default_rng(SEED)
    print("nu(0.5, 1.75) =", repr(nu_bisect(0.5, 1.75)))

    # conditional expectations given w_t = y: w_T = y + G, G ~ N(0, T - t); wperp_T ~ N(0, T)
    rho, T, t, y = 0.5, 1.0, 0.3, 0.7
    s = math.sqrt(1 - rho**2)
    G = rng.standard_normal(N) * math.sqrt(T - t)
    W = rng.standard_normal(N) * math.sqrt(T)
    x = rho * (y + G) - s * W
    m, se = mc_mean(-s * 2 * x)
    print(f"hperp for H=x^2 at (rho={rho}, T={T}, t={t}, y={y}) = {float(m)!r} +- {se:.2g}")
    sigma = 1.0
    m, se = mc_mean(-(1 - rho**2) / sigma * (x > 0).astype(float))
    print(f"h_tilde for H=max(x,0), sigma={sigma} = {float(m)!r} +- {se:.2g}")

    # v1 for H = x with constant theta, built from its Gaussian expectations:
    # nu_t E H_hat(y + (rho/theta) ln nu_t + G) - (1-rho^2) theta nu_t int_t^T 1/D_s ds
    theta, t, y = 0.5, 0.0, 0.0
    nu = lambda u: nu_bisect(rho, 1 - rho**2 + theta**2 * (T - u))  # noqa: E731
    nu_t = nu(t)
    G = rng.standard_normal(N) * math.sqrt(T - t)
    W = rng.standard_normal(N) * math.sqrt(T)
    yT = y + rho / theta * math.log(nu_t) + G
    first, se = mc_mean(nu_t * (rho * yT - s * W))
    integral, _ = integrate.quad(lambda u: 1.0 / (1 - rho**2 + rho**2 * nu(u)), t, T,
                                 epsabs=1e-13, epsrel=1e-12)
    second = (1 - rho**2) * theta * nu_t * integral
    print(f"nu_0 (theta=0.5, rho=0.5, T=1) = {nu_t!r}")
    print(f"v1(0, 0) for H=x = {float(first - second)!r} +- {se:.2g}")


if __name__ == "__main__":
    main()
