"""Command-line experiment runner.

    mvhedge value        --config PATH [--seed N] [--out DIR]
    mvhedge hedge        --config PATH [--seed N] [--out DIR]
    mvhedge probe        --config PATH [--seed N] [--out DIR]
    mvhedge oracle-check --config PATH [--out DIR]

Every subcommand writes its outputs under the output directory and is a
pure function of (config, seed) when deterministic reduction is on. Exit
codes: 0 success, 1 a numerical gate failed, 2 invalid configuration,
3 a solver error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .lattice import LatticeSpec, dp_value
from .montecarlo import PathBatch, optimality_probe, run_hedge
from .pde import closed_form_v1, solve_surfaces
from .value_coeff import NuQuery, solve_nu

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
HEDGE_GATE_SE = 5.0
PROBE_GATE_SE = 3.0
FIT_TOL = 1e-6

SURFACE_UNITS = {
    "t": "time", "y": "sqrt(time)", "v2": "1", "v1": "currency", "v0": "currency^2",
    "z2": "1/sqrt(time)", "z1": "currency/sqrt(time)",
}


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _surfaces(cfg: ExperimentConfig):
    m = cfg.model
    return solve_surfaces(cfg.claim(), m.theta, cfg.context(), cfg.grid)


def cmd_value(cfg: ExperimentConfig, out: Path) -> int:
    m = cfg.model
    s = _surfaces(cfg)
    s.to_csv(out / "surfaces.csv")
    v2, v1, v0 = (float(s.interp(k, 0.0, 0.0)) for k in ("v2", "v1", "v0"))
    nu = solve_nu(NuQuery(abs(m.rho), 1 - m.rho ** 2 + m.theta ** 2 * m.T))
    v1_cf = closed_form_v1(cfg.claim(), m.theta, m.rho, m.T, 0.0, 0.0,
                           quad_nodes=cfg.quad_nodes, mal_variant=cfg.mal_variant)
    delta_v2 = abs(v2 - nu)
    summary = {
        "v0_origin": v0, "v1_origin": v1, "v2_origin": v2,
        "nu": nu, "delta_v2_nu": delta_v2,
        "v1_closed_form": v1_cf, "delta_v1_closed_form": abs(v1 - v1_cf),
        "tolerance": cfg.value_tolerance,
        "passed": delta_v2 <= cfg.value_tolerance,
        "units": SURFACE_UNITS,
    }
    _dump(out / "value_summary.json", summary)
    return EXIT_OK if summary["passed"] else EXIT_GATE


def _batch(cfg: ExperimentConfig) -> PathBatch:
    mc = cfg.mc
    return PathBatch(cfg.model, mc.n_paths, mc.n_steps, mc.seed, mc.block_size)


def cmd_hedge(cfg: ExperimentConfig, out: Path) -> int:
    s = _surfaces(cfg)
    rep = run_hedge(_batch(cfg), s, cfg.claim(), cfg.model, cfg.mc.x0, ctx=cfg.context(),
                    deterministic=cfg.deterministic_reduction,
                    paths_csv=(out / "paths.csv") if cfg.mc.paths_csv else None)
    (out / "report.json").write_text(rep.to_json())
    ok = abs(rep.identity_residual) <= HEDGE_GATE_SE * rep.identity_residual_se
    return EXIT_OK if ok else EXIT_GATE


def cmd_probe(cfg: ExperimentConfig, out: Path) -> int:
    s = _surfaces(cfg)
    res = optimality_probe(_batch(cfg), s, cfg.claim(), cfg.model, cfg.mc.x0, cfg.probe_scale,
                           ctx=cfg.context(), deterministic=cfg.deterministic_reduction)
    (out / "probe.json").write_text(res.to_json())
    ok = res.difference >= -PROBE_GATE_SE * res.difference_se
    return EXIT_OK if ok else EXIT_GATE


def oracle_table(cfg: ExperimentConfig) -> dict:
    """dp_value vs the PDE quadratic at each wealth in ``cfg.oracle.x``."""
    o = cfg.oracle
    c = cfg.claim()
    s = _surfaces(cfg)
    if o.mode == "quadratic":
        spec = LatticeSpec(o.n_steps, quad_nodes=cfg.quad_nodes, mal_variant=cfg.mal_variant)
    else:
        spec = LatticeSpec.exhaustive(o.n_steps, quad_nodes=cfg.quad_nodes,
                                      mal_variant=cfg.mal_variant)
    xs = np.asarray(o.x, float)
    dp = np.atleast_1d(dp_value(spec, cfg.model, c, xs))
    pde = np.array([float(s.value(0.0, x, 0.0)) for x in xs])
    diff = np.abs(dp - pde)
    gap = np.divide(diff, np.abs(pde), out=np.where(diff == 0, 0.0, np.inf), where=pde != 0)
    deg = min(2, xs.size - 1)
    fit = np.polyval(np.polyfit(xs, dp, deg), xs) - dp
    return {"x": xs, "dp": dp, "pde": pde, "gap": gap, "fit": fit}


def cmd_oracle_check(cfg: ExperimentConfig, out: Path) -> int:
    tab = oracle_table(cfg)
    with (out / "oracle.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x [currency]", "dp_value [currency^2]", "pde_value [currency^2]",
                    "rel_gap [1]", "fit_residual [currency^2]"])
        for row in zip(tab["x"], tab["dp"], tab["pde"], tab["gap"], tab["fit"]):
            w.writerow([repr(float(v)) for v in row])
    max_gap = float(np.max(tab["gap"]))
    max_fit = float(np.max(np.abs(tab["fit"])))
    ok = max_gap <= cfg.oracle.max_gap and max_fit < FIT_TOL
    _dump(out / "oracle_summary.json", {
        "n_steps": cfg.oracle.n_steps, "mode": cfg.oracle.mode,
        "max_rel_gap": max_gap, "max_fit_residual": max_fit,
        "gap_tolerance": cfg.oracle.max_gap, "fit_tolerance": FIT_TOL, "passed": ok,
    })
    return EXIT_OK if ok else EXIT_GATE


COMMANDS = {"value": cmd_value, "hedge": cmd_hedge, "probe": cmd_probe,
            "oracle-check": cmd_oracle_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvhedge", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None, help="overrides mc.seed")
    p.add_argument("--out", type=Path, default=None, help="overrides output.dir")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("mc.seed", "must lie in [0, 2^64)")
            cfg = cfg.with_seed(args.seed)
    except (OSError, ConfigError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        code = COMMANDS[args.command](cfg, out)
    except (ArithmeticError, RuntimeError, ValueError) as e:
        print(f"{type(e).__module__}.{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_SOLVER
    if code == EXIT_GATE:
        print(f"{args.command}: numerical gate failed (see {out})", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
