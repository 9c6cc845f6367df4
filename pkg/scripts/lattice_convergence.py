"""Lattice oracle against the continuous value as the step count grows.

Prints the relative gap of the lattice value at x = 1 to the closed-form
root (zero claim) and to the PDE quadratic (linear claim), per step count.

    python scripts/lattice_convergence.py [--out out/lattice]
"""

import argparse
import csv
from pathlib import Path

from mvhedge import LatticeSpec, ModelParams, PdeGrid, dp_value, make_claim, solve_surfaces
from mvhedge.value_coeff import NuQuery, solve_nu


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--steps", type=int, nargs="+", default=[3, 6, 12, 24, 48, 96, 192])
    ap.add_argument("--x", type=float, default=1.0)
    ap.add_argument("--out", type=Path, default=Path("out/lattice"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    m = ModelParams(mu=0.5, sigma=1.0, rho=0.5, T=1.0)
    nu = solve_nu(NuQuery(m.rho, 1 - m.rho**2 + m.theta**2 * m.T))
    lin = make_claim("linear")
    s = solve_surfaces(lin, m.theta, m.context(), PdeGrid.centered(m.T))
    ref_lin = float(s.value(0.0, args.x, 0.0))
    ref_zero = nu * args.x**2

    rows = []
    for n in args.steps:
        z = dp_value(LatticeSpec(n), m, make_claim("zero"), args.x)
        v = dp_value(LatticeSpec(n), m, lin, args.x)
        rows.append(dict(n_steps=n, zero=z, zero_gap=abs(z - ref_zero) / ref_zero,
                         linear=v, linear_gap=abs(v - ref_lin) / abs(ref_lin)))
        print(f"n={n:4d}  zero {z:.6f} gap {rows[-1]['zero_gap']:.2e}   "
              f"linear {v:+.6f} gap {rows[-1]['linear_gap']:.2e}")
    print(f"references: nu x^2 = {ref_zero:.6f}, PDE linear = {ref_lin:+.6f}")

    with (args.out / "lattice_convergence.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
