import json
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from tugwar.cli import ConfigError, ExperimentConfig, compare, main

DISK = {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run(tmp_path, command, cfg, out="out", *extra):
    path = write(tmp_path, cfg, f"{out}.json")
    return main([command, "--config", str(path), "--out", str(tmp_path / out), *extra])


def report(tmp_path, out="out"):
    return json.loads((tmp_path / out / "report.json").read_text())


def test_schema_error_names_path(tmp_path, capsys):
    cfg = {"experiment": "solve", "domain": {"kind": "blob"}}
    assert run(tmp_path, "solve", cfg) == 2
    assert "domain.kind" in capsys.readouterr().err


def test_missing_required_key(tmp_path, capsys):
    assert run(tmp_path, "solve", {"experiment": "solve"}) == 2
    assert "domain" in capsys.readouterr().err


def test_subprocess_exit_code(tmp_path):
    path = write(tmp_path, {"domain": {"kind": "blob"}})
    proc = subprocess.run([sys.executable, "-m", "tugwar", "solve", "--config", str(path),
                           "--out", str(tmp_path / "x")], capture_output=True, text=True)
    assert proc.returncode == 2 and "domain.kind" in proc.stderr


def test_solve_constant(tmp_path):
    cfg = {"domain": DISK, "payoff": {"kind": "constant", "value": 0.7},
           "params": {"p": 4.0, "eps": 0.1}, "points": [[0.1, 0.2], [0.0, 0.0]]}
    assert run(tmp_path, "solve", cfg) == 0
    rep = report(tmp_path)
    assert rep["experiment"] == "solve"
    assert rep["result"]["summary"]["residual"] == 0.0
    assert rep["result"]["values"] == [0.7, 0.7]
    assert rep["config"]["payoff"]["value"] == 0.7
    assert (tmp_path / "out" / "field.txt").exists()


def test_nonconvergence_exit_3(tmp_path, capsys):
    cfg = {"domain": DISK, "payoff": {"kind": "linear"}, "params": {"p": 4.0, "eps": 0.1},
           "solver": {"method": "jacobi", "max_iterations": 2}}
    assert run(tmp_path, "solve", cfg) == 3
    assert "residual" in capsys.readouterr().err


def test_reports_identical_but_header(tmp_path):
    cfg = {"domain": DISK, "payoff": {"kind": "linear"}, "params": {"p": 4.0, "eps": 0.1},
           "points": [[0.2, 0.1]], "n_samples": 200,
           "strategies": {"I": {"kind": "random"}, "II": {"kind": "random"}}}
    assert run(tmp_path, "simulate", cfg, "a") == 0
    assert run(tmp_path, "simulate", cfg, "b") == 0
    a, b = report(tmp_path, "a"), report(tmp_path, "b")
    a.pop("header"), b.pop("header")
    a["config"].pop("output"), b["config"].pop("output")
    assert json.dumps(a) == json.dumps(b)


def test_no_overwrite_without_force(tmp_path, capsys):
    cfg = {"domain": DISK, "payoff": {"kind": "constant", "value": 1.0}, "params": {"p": 4.0, "eps": 0.2}}
    assert run(tmp_path, "solve", cfg) == 0
    assert run(tmp_path, "solve", cfg) == 2
    assert "--force" in capsys.readouterr().err
    assert run(tmp_path, "solve", cfg, "out", "--force") == 0


def test_compare_identical_and_seed_only(tmp_path):
    cfg = {"domain": DISK, "payoff": {"kind": "linear"}, "params": {"p": 4.0, "eps": 0.1},
           "points": [[0.2, 0.1]], "n_samples": 200,
           "strategies": {"I": {"kind": "random"}, "II": {"kind": "random"}}}
    assert run(tmp_path, "simulate", cfg, "a") == 0
    assert run(tmp_path, "simulate", cfg, "c", "--seed", "9") == 0
    a, c = report(tmp_path, "a"), report(tmp_path, "c")
    same = compare(a, a)
    assert same["diffs"] == [] and same["max_abs_diff"] == 0.0
    d = compare(a, c)
    assert d["diffs"] and d["stochastic_only"]
    assert any(x["path"] == "config.seed" for x in d["diffs"])


def test_compare_kind_mismatch():
    with pytest.raises(ValueError):
        compare({"experiment": "solve"}, {"experiment": "theta"})


def test_compare_solve_with_simulate(tmp_path):
    base = {"domain": DISK, "payoff": {"kind": "linear"}, "params": {"p": 4.0, "eps": 0.1},
            "points": [[0.2, 0.1], [-0.3, 0.0]]}
    assert run(tmp_path, "solve", base, "s") == 0
    assert run(tmp_path, "simulate", dict(base, n_samples=300), "m") == 0
    d = compare(report(tmp_path, "s"), report(tmp_path, "m"))
    assert len(d["point_abs_diff"]) == 2
    assert d["max_abs_diff"] == max(d["point_abs_diff"]) < 0.2


def test_compare_cli(tmp_path, capsys):
    cfg = {"domain": DISK, "payoff": {"kind": "constant", "value": 1.0}, "params": {"p": 4.0, "eps": 0.2}}
    assert run(tmp_path, "solve", cfg) == 0
    capsys.readouterr()
    p = str(tmp_path / "out" / "report.json")
    assert main(["compare", p, p]) == 0
    assert json.loads(capsys.readouterr().out)["diffs"] == []


def test_measure_and_theta_experiments(tmp_path):
    cfg = {"domain": DISK, "params": {"p": 4.0}, "E": {"kind": "point", "point": [1.0, 0.0]},
           "x0": [0.0, 0.0], "schedule": {"eps": [0.1], "delta": [0.6, 0.4]}}
    assert run(tmp_path, "measure", cfg, "m") == 0
    rows = report(tmp_path, "m")["result"]["table"]["rows"]
    assert rows[1]["estimate"] < rows[0]["estimate"]
    assert (tmp_path / "m" / "measure.csv").read_text().startswith("eps,delta")
    dom = {"kind": "ball_minus_point_sequence", "scale": 2.0, "ratio": 0.25, "k_max": 5}
    cfg = {"domain": dom, "params": {"p": 4.0}, "plan": {"stage_eps": 0.08, "stages": [1, 2]}}
    assert run(tmp_path, "theta", cfg, "t") == 0
    th = report(tmp_path, "t")["result"]["theta"]
    assert th[0] > 0 and abs(th[0] - th[1]) < 1e-9


def test_perturb_and_union_experiments(tmp_path):
    pd = {"kind": "punctured_ball"}
    cfg = {"domain": pd, "payoff": {"kind": "constant", "value": 0.0}, "params": {"p": 4.0, "eps": 0.1},
           "overrides": [[[0.0, 0.0], 1.0]], "x0": [0.5, 0.0], "n_samples": 200,
           "strategies": {"I": {"kind": "pull_toward", "target": [0.0, 0.0]}}}
    assert run(tmp_path, "perturb", cfg, "p") == 0
    assert report(tmp_path, "p")["result"]["difference"] > 0.3
    cfg = {"domain": DISK, "params": {"p": 4.0}, "x0": [0.0, 0.0], "E_list": [],
           "F": {"kind": "arc", "theta1": 0.0, "theta2": 1.5707963267948966},
           "schedule": {"eps": [0.1], "delta": [0.4]}}
    assert run(tmp_path, "union", cfg, "u") == 0
    assert report(tmp_path, "u")["result"]["gap"] == 0.0


def test_flags_override_config(tmp_path):
    cfg = {"domain": DISK, "payoff": {"kind": "constant", "value": 0.5}, "params": {"p": 4.0, "eps": 0.2}}
    assert run(tmp_path, "solve", cfg, "o", "--seed", "4", "--tol", "1e-8", "--workers", "3") == 0
    rep = report(tmp_path, "o")
    assert rep["config"]["seed"] == 4 and rep["config"]["tol"] == 1e-8
    assert rep["header"]["workers"] == 3 and "timestamp" in rep["header"]


def test_config_for_other_experiment(tmp_path):
    cfg = {"experiment": "theta", "domain": DISK}
    assert run(tmp_path, "solve", cfg) == 2


def test_from_json_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")


finite = st.floats(-10, 10, allow_nan=False)
configs = st.fixed_dictionaries(
    {"experiment": st.sampled_from(["solve", "simulate", "measure"]),
     "domain": st.sampled_from([DISK, {"kind": "punctured_ball"}, {"kind": "annulus", "r1": 0.3}]),
     "params": st.fixed_dictionaries({"p": st.floats(1.5, 10), "eps": st.floats(0.01, 0.5)})},
    optional={"payoff": st.builds(lambda v: {"kind": "constant", "value": v}, finite),
              "x0": st.lists(finite, min_size=2, max_size=2),
              "seed": st.integers(0, 2**31),
              "n_samples": st.integers(1, 10**6),
              "schedule": st.fixed_dictionaries({"eps": st.lists(st.floats(0.01, 1), min_size=1),
                                                 "delta": st.lists(st.floats(0.01, 1), min_size=1)})})


@given(configs)
def test_config_round_trip(raw):
    cfg = ExperimentConfig.from_dict(raw)
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert ExperimentConfig.from_dict(again.to_dict()) == cfg
