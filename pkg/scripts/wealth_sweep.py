"""Fit the Monte Carlo reduced objective as a quadratic in initial wealth.

Compares the fitted coefficients with (v0, -2 v1, v2) read off the PDE
surfaces at the origin.

    python scripts/wealth_sweep.py [--claim call] [--paths 100000]
"""

import argparse
from pathlib import Path

from mvhedge import ModelParams, PathBatch, PdeGrid, make_claim, solve_surfaces, wealth_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--claim", default="call")
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=256)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--out", type=Path, default=Path("out/sweep"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    m = ModelParams(mu=0.5, sigma=1.0, rho=0.5, T=1.0)
    c = make_claim(args.claim, mu=m.mu, sigma=m.sigma, T=m.T)
    s = solve_surfaces(c, m.theta, m.context(), PdeGrid.centered(m.T))
    fit = wealth_sweep(PathBatch(m, args.paths, args.steps, args.seed), s, c, m,
                       [-2.0, -1.0, 0.0, 1.0, 2.0])
    v0, v1, v2 = (float(s.interp(k, 0.0, 0.0)) for k in ("v0", "v1", "v2"))
    print(f"R^2 = {fit.r_squared:.8f}")
    for name, a, se, ref in zip(("a0", "a1", "a2"), fit.coef, fit.coef_se, (v0, -2 * v1, v2)):
        print(f"{name}: MC {a:+.5f} +- {se:.5f}   PDE {ref:+.5f}   z = {(a - ref) / se:+.2f}")
    (args.out / f"sweep_{args.claim}.json").write_text(fit.to_json())


if __name__ == "__main__":
    main()
