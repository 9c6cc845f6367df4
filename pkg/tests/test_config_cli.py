import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from mvhedge.cli import EXIT_CONFIG, EXIT_GATE, EXIT_OK, EXIT_SOLVER, main, oracle_table
from mvhedge.config import ConfigError, from_dict, load_config, parse_config
from mvhedge.value_coeff import NuQuery, solve_nu

MODEL = """\
model.mu = 0.5
model.sigma = 1.0
model.rho = 0.5
model.T = 1.0
"""
CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SMALL = """\
grid.t_nodes = 101
grid.y_nodes = 201
mc.n_paths = 8000
mc.n_steps = 32
mc.seed = 3
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, cmd, text, *extra):
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    return main([cmd, "--config", str(cfg), "--out", str(out), *extra]), out


# ------------------------------------------------------------- parsing

def test_parse_values():
    d = parse_config("a.b = 1\na.c = 2.5  # note\n\na.d = true\na.e = -1, 0, 1\na.f = w0\n")
    assert d == {"a.b": 1, "a.c": 2.5, "a.d": True, "a.e": (-1.0, 0.0, 1.0), "a.f": "w0"}


@pytest.mark.parametrize("text,path", [
    ("model.mu 0.5", "line 1"),
    ("mu = 0.5", "line 1"),
    ("model.mu = 1\nmodel.mu = 2", "model.mu"),
])
def test_parse_errors(text, path):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.path == path


@pytest.mark.parametrize("drop", ["model.sigma", "model.T", "model.rho", "model.mu"])
def test_missing_field_named(drop):
    d = parse_config(MODEL)
    del d[drop]
    with pytest.raises(ConfigError) as e:
        from_dict(d)
    assert e.value.path == drop
    assert str(e.value).startswith(drop)


@pytest.mark.parametrize("key,value", [
    ("model.sigma", -1.0), ("model.rho", 1.0), ("model.T", 0.0), ("mc.n_paths", 0),
    ("mc.n_steps", 2.5), ("grid.boundary", "open"), ("mode.mal_variant", "other"),
    ("oracle.mode", "grid"), ("mc.bogus", 1), ("claim.name", "barrier"), ("model.mu", "fast"),
])
def test_invalid_fields_named(key, value):
    d = parse_config(MODEL)
    d[key] = value
    with pytest.raises(ConfigError) as e:
        from_dict(d)
    assert e.value.path == key


def test_bad_claim_parameter():
    d = parse_config(MODEL + "claim.name = call\nclaim.underlying = z\n")
    with pytest.raises(ConfigError) as e:
        from_dict(d)
    assert e.value.path == "claim"


def test_shipped_configs_load():
    for name in ("baseline", "call"):
        cfg = load_config(CONFIGS / f"{name}.cfg")
        assert cfg.model.rho == 0.5 and cfg.grid.boundary == "natural"
    assert load_config(CONFIGS / "call.cfg").claim_name == "call"


# ------------------------------------------------------------- commands

def test_value_zero_theta(tmp_path):
    code, out = run(tmp_path, "value", MODEL.replace("mu = 0.5", "mu = 0.0") + SMALL)
    assert code == EXIT_OK
    s = json.loads((out / "value_summary.json").read_text())
    assert s["v2_origin"] == pytest.approx(1.0, abs=1e-14)
    assert s["nu"] == 1.0 and s["passed"]
    header = (out / "surfaces.csv").read_text().splitlines()[0]
    assert header == "t,y,v2,v1,v0,z2,z1"
    assert set(s["units"]) == set(header.split(","))


def test_value_constant_theta_within_tolerance(tmp_path):
    code, out = run(tmp_path, "value", MODEL + SMALL + "claim.name = linear\n")
    s = json.loads((out / "value_summary.json").read_text())
    assert code == EXIT_OK
    assert s["delta_v2_nu"] <= s["tolerance"]
    assert s["nu"] == pytest.approx(solve_nu(NuQuery(0.5, 1.0)), rel=1e-14)
    assert s["delta_v1_closed_form"] < 1e-3


def test_value_gate_failure(tmp_path):
    code, out = run(tmp_path, "value", MODEL + SMALL + "value.tolerance = 1e-12\n")
    assert code == EXIT_GATE
    assert not json.loads((out / "value_summary.json").read_text())["passed"]


def test_missing_sigma_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "value", MODEL.replace("model.sigma = 1.0\n", ""))
    assert code == EXIT_CONFIG
    assert "model.sigma" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["value", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG


def test_solver_error_names_module(tmp_path, capsys, monkeypatch):
    import mvhedge.cli as cli
    from mvhedge.pde import DivergenceError

    def boom(*a, **k):
        raise DivergenceError("fixed-point sweeps did not converge")

    monkeypatch.setattr(cli, "solve_surfaces", boom)
    code, _ = run(tmp_path, "value", MODEL + SMALL)
    assert code == EXIT_SOLVER
    assert "mvhedge.pde.DivergenceError" in capsys.readouterr().err


def test_hedge_baseline_and_determinism(tmp_path):
    text = MODEL + SMALL + "mc.x0 = 1.0\n"
    code, out = run(tmp_path, "hedge", text)
    assert code == EXIT_OK
    first = (out / "report.json").read_bytes()
    rep = json.loads(first)
    nu = solve_nu(NuQuery(0.5, 1.0))
    assert abs(rep["reduced_objective"] - nu) < 3 * rep["reduced_objective_se"]
    assert main(["hedge", "--config", str(tmp_path / "run.cfg"), "--out", str(out)]) == EXIT_OK
    assert (out / "report.json").read_bytes() == first
    assert not (out / "paths.csv").exists()


def test_hedge_linear_claim_and_seed_override(tmp_path):
    text = MODEL + SMALL + "claim.name = linear\nmc.paths_csv = true\n"
    code, out = run(tmp_path, "hedge", text, "--seed", "99")
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["seed"] == 99
    assert abs(rep["identity_residual"]) <= 3 * rep["identity_residual_se"]
    assert len((out / "paths.csv").read_text().splitlines()) == 8001


def test_probe(tmp_path):
    code, out = run(tmp_path, "probe", MODEL + SMALL + "claim.name = linear\nprobe.scale = 2.0\n")
    assert code == EXIT_OK
    p = json.loads((out / "probe.json").read_text())
    assert p["difference"] > 3 * p["difference_se"]


def test_oracle_check(tmp_path):
    code, out = run(tmp_path, "oracle-check", MODEL + "claim.name = zero\n")
    assert code == EXIT_OK
    with (out / "oracle.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["x [currency]", "dp_value [currency^2]", "pde_value [currency^2]",
                             "rel_gap [1]", "fit_residual [currency^2]"]
    zero = next(r for r in rows if float(r["x [currency]"]) == 0.0)
    assert float(zero["dp_value [currency^2]"]) == 0.0
    assert float(zero["pde_value [currency^2]"]) == 0.0
    s = json.loads((out / "oracle_summary.json").read_text())
    assert s["passed"] and s["max_rel_gap"] <= 0.02 and s["max_fit_residual"] < 1e-6


def test_oracle_table_linear():
    cfg = from_dict(parse_config(MODEL + "claim.name = linear\n"))
    tab = oracle_table(cfg)
    assert tab["gap"].max() <= 0.02
    assert abs(tab["fit"]).max() < 1e-6


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, MODEL.replace("model.sigma = 1.0\n", ""))
    r = subprocess.run([sys.executable, "-m", "mvhedge.cli", "value", "--config", str(cfg)],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_CONFIG
    assert "model.sigma" in r.stderr
