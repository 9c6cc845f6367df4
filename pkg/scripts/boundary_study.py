"""Effect of the spatial boundary treatment on the value surfaces.

Solves the call surfaces with every boundary mode on the default grid and
reports the largest deviation from the default mode inside |y| <= 1, 2, 3.
For H = y, also reports the error of v0 against its exact value
y^2 + (1 - rho^2)(T - t) at theta = 0.

    python scripts/boundary_study.py
"""

import numpy as np

from mvhedge import PdeGrid, ProjectionContext, make_claim, solve_surfaces
from mvhedge.pde import BOUNDARIES

RHO, T = 0.5, 1.0


def main():
    ctx = ProjectionContext(RHO, T)
    call = make_claim("call")
    obs = make_claim("linear", a=0.0, b=1.0)
    ref = solve_surfaces(call, 0.5, ctx, PdeGrid.centered(T))
    for b in BOUNDARIES:
        g = PdeGrid.centered(T, boundary=b)
        s = solve_surfaces(call, 0.5, ctx, g)
        dev = [np.max(np.abs(s.v0[:, np.abs(g.y) <= w] - ref.v0[:, np.abs(g.y) <= w]))
               for w in (1, 2, 3)]
        o = solve_surfaces(obs, 0.0, ctx, g)
        tt, yy = np.meshgrid(g.t, g.y, indexing="ij")
        exact = yy**2 + (1 - RHO**2) * (T - tt)
        err = np.max(np.abs(o.v0 - exact)[:, np.abs(g.y) <= 3])
        print(f"{b:10s} call v0 deviation |y|<=1,2,3: "
              + "  ".join(f"{d:.1e}" for d in dev) + f"   H=y v0 error {err:.1e}")


if __name__ == "__main__":
    main()
