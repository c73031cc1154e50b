import csv
import json

import numpy as np
import pytest
import sympy

from nfcont import cli
from nfcont.cli import ConfigError, build_model, main, parse_expression, validate

RING = {"model": {"type": "ring", "params": {"n": 32}}, "params": {"lam": 6.0}}


def run(tmp_path, command, config, *extra, name="cfg.json", out="out"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    code = main([command, "--config", str(path), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_roundtrip(tmp_path):
    code, out = run(tmp_path, "solve", {**RING, "solver": {"n_starts": 256}})
    assert code == 0
    rows = read_csv(out / "solutions.csv")
    assert len(rows) == 5
    model = build_model(RING)
    for row in rows:
        v = np.array([float(row[f"v{k}"]) for k in (1, 2, 3)])
        assert np.linalg.norm(model.residual(v)) < 1e-8
    meta = json.loads((out / "run.json").read_text())
    assert meta["summary"]["degree"] == 1
    assert meta["config"] == {**RING, "solver": {"n_starts": 256}}
    assert set(meta["versions"]) >= {"nfcont", "numpy", "scipy"}


def test_continue_writes_diagram(tmp_path):
    cfg = {**RING, "params": {"lam": 0.0}, "continuation": {"range": [0, 7]}}
    code, out = run(tmp_path, "continue", cfg)
    assert code == 0
    special = read_csv(out / "special_points.csv")
    lams = sorted(float(r["lam"]) for r in special if r["kind"] == "branch" and r["branch_id"] == "0")
    K = build_model(RING).kernel.coordinate_matrix
    sig = np.sort(np.linalg.eigvals(K).real)[::-1][:2]
    np.testing.assert_allclose(lams, np.sort(4 / sig), atol=1e-6)
    assert (out / "diagram.svg").read_text().startswith("<?xml")


def test_single_branch_mode(tmp_path):
    cfg = {**RING, "params": {"lam": 1.0, "mu": 1.0},
           "continuation": {"mode": "single", "active": "eps", "range": [0, 1]}}
    code, out = run(tmp_path, "continue", cfg)
    assert code == 0
    rows = read_csv(out / "branches.csv")
    assert {r["active"] for r in rows} == {"eps"}
    assert float(rows[-1]["eps"]) == pytest.approx(1.0)


def test_bifurcate_and_simulate(tmp_path):
    code, out = run(tmp_path, "bifurcate", RING)
    assert code == 0
    rows = read_csv(out / "bifurcation_report.csv")
    assert sorted(r["type"] for r in rows) == ["inadmissible", "pitchfork", "pitchfork"]
    code, out = run(tmp_path, "simulate", {**RING, "simulate": {"n_trajectories": 2, "t_end": 5}}, out="sim")
    assert code == 0
    rows = read_csv(out / "trajectories.csv")
    assert {r["trajectory"] for r in rows} == {"0", "1"}


def test_audit_passes_on_ring(tmp_path):
    code, out = run(tmp_path, "audit", {**RING, "audit": {"lams": [2.0, 5.5, 8.0]}, "solver": {"n_starts": 256}})
    assert code == 0
    meta = json.loads((out / "run.json").read_text())
    assert [a["n_solutions"] for a in meta["summary"]["audits"]] == [1, 3, 5]


def test_custom_model(tmp_path):
    cfg = {
        "model": {"type": "custom", "bounds": [-1, 1], "nodes": 12, "normalization": 0.5,
                  "X": ["1", "x"], "Y": ["2", "-x"], "input": "0.1 + 0.2*x", "theta": 0.05},
        "params": {"lam": 3.0, "eps": 1.0, "mu": 1.0},
    }
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    assert read_csv(out / "solutions.csv")


def test_sweep_is_deterministic_across_threads(tmp_path):
    cfg = {**RING, "params": {"lam": 0.0},
           "sweep": {"lam_range": [0, 6], "legs": [["mu", 1.0]], "lam_step": 1.0},
           "output": {"diagram": False}}
    c1, o1 = run(tmp_path, "sweep", cfg, "--threads", "1", out="t1")
    c2, o2 = run(tmp_path, "sweep", cfg, "--threads", "2", out="t2")
    assert c1 == c2 == 0
    for name in ("branches.csv", "special_points.csv"):
        assert (o1 / name).read_bytes() == (o2 / name).read_bytes()
    assert not (o1 / "diagram.svg").exists()


@pytest.mark.parametrize(
    "config",
    [
        {"model": {"type": "ring"}, "bogus": 1},
        {"model": {"type": "ring", "params": {"alpha": 2.0}}},
        {"model": {"type": "ring", "nodes": 8}},
        {"model": {"type": "sphere"}},
        {"model": {"type": "ring"}, "params": {"mu": 2.0}},
        {"model": {"type": "custom", "bounds": [-1, 1], "X": ["__import__('os')"], "Y": ["1"]}},
        {"model": {"type": "custom", "bounds": [-1, 1], "X": ["x**-1"], "Y": ["1"]}},
        {"model": {"type": "ring"}, "continuation": {"ds": 5.0}},
        {"params": {"lam": 1.0}},
    ],
)
def test_invalid_configs_exit_2_without_output(tmp_path, config):
    code, out = run(tmp_path, "continue", config)
    assert code == 2
    assert not out.exists()


def test_bad_cli_values(tmp_path):
    assert run(tmp_path, "solve", RING, "--seed", "-1")[0] == 2
    assert run(tmp_path, "solve", RING, "--threads", "0")[0] == 2
    (tmp_path / "broken.json").write_text("{")
    assert main(["solve", "--config", str(tmp_path / "broken.json")]) == 2
    with pytest.raises(SystemExit):
        main(["explode", "--config", "x.json"])


def test_invariant_violation_exits_4(tmp_path, monkeypatch):
    real = cli.stationary.parity_audit

    def broken(sols, model=None):
        rep = real(sols, model)
        return type(rep)(signs=rep.signs, total=rep.total + 2, count=rep.count, conclusive=True)

    monkeypatch.setattr(cli.stationary, "parity_audit", broken)
    code, out = run(tmp_path, "solve", RING)
    assert code == 4
    assert (out / "solutions.csv").exists()


def test_solver_failure_exits_3(tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise cli.continuation.ContinuationError("seed is not a stationary state")

    monkeypatch.setattr(cli.continuation, "trace", fail)
    cfg = {**RING, "continuation": {"mode": "single"}}
    code, out = run(tmp_path, "continue", cfg)
    assert code == 3
    assert not out.exists()


def test_seed_outside_range_is_a_config_error(tmp_path):
    cfg = {**RING, "continuation": {"mode": "single", "range": [0, 2]}}
    code, out = run(tmp_path, "continue", cfg)
    assert code == 2
    assert not out.exists()


def test_parse_expression():
    x = sympy.Symbol("x")
    assert parse_expression("1 + 2*x**2 - cos(pi*x)/3") == 1 + 2 * x**2 - sympy.cos(sympy.pi * x) / 3
    assert parse_expression("-x", ("x",)) == -x
    for bad in ["exp(x)", "x**0.5", "y", "x.real", "lambda: 1", "True", "cos(x, x)", "1 +"]:
        with pytest.raises(ConfigError):
            parse_expression(bad)


def test_validate_returns_config():
    assert validate(dict(RING)) == RING
    with pytest.raises(ConfigError):
        validate({"model": {"type": "custom", "X": ["1"], "Y": ["1"], "bounds": [0, 1], "params": {}}})
