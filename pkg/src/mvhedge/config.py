"""Experiment configuration from flat ``section.key = value`` text files.

Example::

    # baseline
    model.mu = 0.5
    model.sigma = 1.0
    model.rho = 0.5
    model.T = 1.0
    claim.name = call
    claim.strike = 0.0
    mc.n_paths = 100000
    mc.seed = 42

Blank lines and ``#`` comments are ignored. Values are parsed as bool,
int, float, comma-separated number lists, or left as strings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .claims import BUILTIN_CLAIMS, MAL_VARIANTS, Claim, ProjectionContext, make_claim
from .montecarlo import ModelParams
from .pde import BOUNDARIES, PdeGrid

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def _value(raw: str) -> Any:
    s = raw.strip()
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    if "," in s:
        try:
            return tuple(float(p) for p in s.split(",") if p.strip())
        except ValueError:
            pass
    return s


def parse_config(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}", "expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if not key or "." not in key:
            raise ConfigError(f"line {n}", f"key {key!r} must be dotted, e.g. model.mu")
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = _value(val)
    return out


@dataclass(frozen=True)
class MCSettings:
    n_paths: int = 100_000
    n_steps: int = 256
    seed: int = 0
    x0: float = 0.0
    block_size: int = 4096
    paths_csv: bool = False


@dataclass(frozen=True)
class OracleSettings:
    n_steps: int = 12
    x: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)
    mode: str = "quadratic"
    max_gap: float = 0.02


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    claim_name: str = "zero"
    claim_params: dict = field(default_factory=dict)
    grid: PdeGrid = None
    mc: MCSettings = MCSettings()
    oracle: OracleSettings = OracleSettings()
    probe_scale: float = 1.5
    mal_variant: str = "second_arg_unscaled"
    quad_nodes: int = 64
    deterministic_reduction: bool = True
    value_tolerance: float = 1e-3
    out_dir: str = "out"

    def claim(self) -> Claim:
        m = self.model
        return make_claim(self.claim_name, mu=m.mu, sigma=m.sigma, T=m.T, **self.claim_params)

    def context(self) -> ProjectionContext:
        return ProjectionContext(self.model.rho, self.model.T, self.quad_nodes, self.mal_variant)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, mc=replace(self.mc, seed=int(seed)))


_KNOWN = {
    "model": {"mu", "sigma", "rho", "T"},
    "grid": {"t_nodes", "y_nodes", "width", "boundary"},
    "mc": {"n_paths", "n_steps", "seed", "x0", "block_size", "paths_csv"},
    "oracle": {"n_steps", "x", "mode", "max_gap"},
    "probe": {"scale"},
    "mode": {"mal_variant", "deterministic_reduction", "quad_nodes"},
    "value": {"tolerance"},
    "output": {"dir"},
}


def _num(d, key, kind=float, default=None, check=None, why=""):
    if key not in d:
        if default is None:
            raise ConfigError(key, "missing required field")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(key, f"expected an integer, got {v!r}")
        v = int(v)
    v = kind(v)
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    if check is not None and not check(v):
        raise ConfigError(key, why)
    return v


def from_dict(d: dict[str, Any]) -> ExperimentConfig:
    for key in d:
        sec, name = key.split(".", 1)
        if sec == "claim":
            continue
        if sec not in _KNOWN or name not in _KNOWN[sec]:
            raise ConfigError(key, "unknown field")

    T = _num(d, "model.T", check=lambda v: v > 0, why="must be > 0")
    sigma = _num(d, "model.sigma", check=lambda v: v > 0, why="must be > 0")
    rho = _num(d, "model.rho", check=lambda v: abs(v) < 1, why="must satisfy |rho| < 1")
    mu = _num(d, "model.mu")
    model = ModelParams(mu, sigma, rho, T)

    name = d.get("claim.name", "zero")
    if name not in BUILTIN_CLAIMS:
        raise ConfigError("claim.name", f"unknown claim {name!r}; expected one of {BUILTIN_CLAIMS}")
    params = {k.split(".", 1)[1]: v for k, v in d.items() if k.startswith("claim.") and k != "claim.name"}

    width = _num(d, "grid.width", default=6.0, check=lambda v: v > 0, why="must be > 0")
    boundary = d.get("grid.boundary", "natural")
    if boundary not in BOUNDARIES:
        raise ConfigError("grid.boundary", f"must be one of {BOUNDARIES}")
    grid = PdeGrid.centered(
        T, width,
        t_nodes=_num(d, "grid.t_nodes", int, 400, lambda v: v >= 3, "must be >= 3"),
        y_nodes=_num(d, "grid.y_nodes", int, 401, lambda v: v >= 5, "must be >= 5"),
        boundary=boundary,
    )

    pos = (lambda v: v >= 1, "must be >= 1")
    mc = MCSettings(
        n_paths=_num(d, "mc.n_paths", int, MCSettings.n_paths, *pos),
        n_steps=_num(d, "mc.n_steps", int, MCSettings.n_steps, *pos),
        seed=_num(d, "mc.seed", int, 0, lambda v: 0 <= v < 2 ** 64, "must lie in [0, 2^64)"),
        x0=_num(d, "mc.x0", float, 0.0),
        block_size=_num(d, "mc.block_size", int, MCSettings.block_size, *pos),
        paths_csv=bool(d.get("mc.paths_csv", False)),
    )

    xs = d.get("oracle.x", OracleSettings.x)
    xs = (float(xs),) if isinstance(xs, (int, float)) else tuple(xs)
    mode = d.get("oracle.mode", "quadratic")
    if mode not in ("quadratic", "exhaustive"):
        raise ConfigError("oracle.mode", "must be 'quadratic' or 'exhaustive'")
    oracle = OracleSettings(
        n_steps=_num(d, "oracle.n_steps", int, 12, *pos), x=xs, mode=mode,
        max_gap=_num(d, "oracle.max_gap", float, 0.02, lambda v: v > 0, "must be > 0"),
    )

    mal = d.get("mode.mal_variant", "second_arg_unscaled")
    if mal not in MAL_VARIANTS:
        raise ConfigError("mode.mal_variant", f"must be one of {MAL_VARIANTS}")
    cfg = ExperimentConfig(
        model=model, claim_name=name, claim_params=params, grid=grid, mc=mc, oracle=oracle,
        probe_scale=_num(d, "probe.scale", float, 1.5),
        mal_variant=mal,
        quad_nodes=_num(d, "mode.quad_nodes", int, 64, lambda v: v >= 2, "must be >= 2"),
        deterministic_reduction=bool(d.get("mode.deterministic_reduction", True)),
        value_tolerance=_num(d, "value.tolerance", float, 1e-3, lambda v: v > 0, "must be > 0"),
        out_dir=str(d.get("output.dir", "out")),
    )
    try:
        cfg.claim()
    except (TypeError, ValueError) as e:
        raise ConfigError("claim", str(e)) from e
    return cfg


def load_config(path) -> ExperimentConfig:
    return from_dict(parse_config(Path(path).read_text()))
