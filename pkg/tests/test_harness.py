import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import graphs
from spinlab.harness import (
    SUITES,
    Check,
    ConfigError,
    ExperimentConfig,
    Report,
    dumps17,
    parse_grid,
    run,
    run_suite,
    sweep,
    write_report,
)
from spinlab.model import build_model

MODEL = {"kind": "ising", "params": {"beta": 0.3}, "graph": {"family": "cycle", "params": [4]}}


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": MODEL, "colour": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"suites": ["exactness"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": MODEL, "suites": ["nope"]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": MODEL, "sampled_policy": "lenient"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": MODEL, "caps": {"states": 0}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": MODEL, "seed": 2**64})


def test_caps_from_environment(monkeypatch):
    monkeypatch.setenv("SPINLAB_PAIR_CAP", "77")
    cfg = ExperimentConfig.from_dict({"model": MODEL})
    assert cfg.caps["pairs"] == 77


def test_empty_suite_list_passes():
    rep = run(ExperimentConfig.from_dict({"model": MODEL, "suites": []}))
    assert rep.exit_code == 0 and rep.checks == [] and rep.errors == []


def test_model_errors_are_reported():
    bad = {"kind": "hardcore", "params": {"lam": -1}, "graph": {"family": "path", "params": [3]}}
    rep = run(ExperimentConfig.from_dict({"model": bad, "suites": ["exactness"]}))
    assert rep.exit_code == 1
    assert rep.errors[0]["suite"] == "model"


def test_check_and_report_codes():
    ok = Check("a", "s", {}, {}, 1.0, -1e-12, 1e-10)
    bad = Check("b", "s", {}, {}, 1.0, -1e-3, 1e-10)
    sampled_bad = Check("c", "s", {}, {}, None, -1.0, 0.0, sampled=True)
    descriptive = Check("d", "s", {}, {}, None, None, 0.0)
    assert ok.passed and not bad.passed and descriptive.passed
    assert Report("r", 0, {}, [ok, descriptive]).exit_code == 0
    assert Report("r", 0, {}, [ok, bad]).exit_code == 1
    r = Report("r", 0, {}, [ok, sampled_bad])
    assert r.exit_code == 0 and r.advisory_code == 3


@given(st.floats(allow_nan=False, allow_infinity=False))
@settings(max_examples=200)
def test_dumps17_roundtrips_floats(x):
    assert json.loads(dumps17({"x": x}))["x"] == x


def test_dumps17_special_values():
    d = json.loads(dumps17({"a": float("nan"), "b": float("inf"), "c": -math.inf, "d": np.float64(0.1), "e": np.arange(3)}))
    assert d == {"a": "nan", "b": "inf", "c": "-inf", "d": 0.1, "e": [0, 1, 2]}


def test_parse_grid():
    assert parse_grid("0.1:0.1:0.5") == [0.1, 0.2, 0.3, 0.4, 0.5]
    assert parse_grid("3,4,5", integer=True) == [3, 4, 5]
    assert parse_grid("cycle,path") == ["cycle", "path"]
    with pytest.raises(ConfigError):
        parse_grid("1:0:2")
    with pytest.raises(ConfigError):
        parse_grid("")


def test_write_report_files(tmp_path):
    cfg = ExperimentConfig.from_dict({"model": MODEL, "suites": ["exactness", "pinsker"], "seed": 4})
    rep = run(cfg)
    write_report(rep, tmp_path / "r.json", tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["exit_code"] == 0
    assert "runtime" not in data
    timing = json.loads((tmp_path / "r.json.timing.json").read_text())
    assert set(timing) == {"exactness", "pinsker"}
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(rows) == len(rep.checks)
    assert all(r["passed"] == "1" for r in rows)


def test_run_is_deterministic(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {"model": MODEL, "suites": ["stein", "pinsker", "sampler_fidelity"], "seed": 8, "options": {"stein": {"cases": 50}, "sampler_fidelity": {"steps": 5000}}}
    )
    a = dumps17(run(cfg).to_dict())
    b = dumps17(run(cfg).to_dict())
    assert a == b
    other = ExperimentConfig.from_dict({**{"model": MODEL, "suites": ["pinsker"]}, "seed": 9})
    assert dumps17(run(other).to_dict()) != dumps17(run(ExperimentConfig.from_dict({"model": MODEL, "suites": ["pinsker"], "seed": 8})).to_dict())


def test_every_suite_runs_on_a_small_potts_model():
    sys_ = build_model("potts", graphs.path(3), q=2, beta=0.3)
    opts = {
        "stein": {"cases": 30},
        "entropy_identities": {"draws": 200},
        "recursion": {"functions": 50},
        "pinsker": {"functions": 100},
        "block_decay": {"alphas": 1, "functions": 50, "extra_random": 50},
        "sw_chain": {"functions": 50, "joint_functions": 50},
        "sampler_fidelity": {"steps": 20000, "starts": 1},
        "contraction_si": {"weight_draws": 1},
    }
    for name in SUITES:
        checks = run_suite(name, sys_, opts, seed=1)
        assert checks, name
        failing = [c.name for c in checks if not c.passed and not c.sampled]
        assert not failing, (name, failing)


def test_sw_suite_not_applicable_to_hardcore():
    checks = run_suite("sw_chain", build_model("hardcore", graphs.path(3), lam=1.0))
    assert checks[0].margin is None and "not" in checks[0].note


def test_sweep_writes_points(tmp_path):
    cfg = ExperimentConfig.from_dict({"model": MODEL, "suites": ["exactness"], "name": "sw"})
    rows = sweep(cfg, "beta", [0.1, 0.2], tmp_path)
    assert [r["exit_code"] for r in rows] == [0, 0]
    assert (tmp_path / "point_000.json").exists() and (tmp_path / "point_001.csv").exists()
    lines = list(csv.DictReader(open(tmp_path / "sweep.csv")))
    assert [float(r["value"]) for r in lines] == [0.1, 0.2]
    assert float(lines[0]["kappa"]) < float(lines[1]["kappa"])


def test_sweep_records_failures(tmp_path):
    cfg = ExperimentConfig.from_dict({"model": MODEL, "suites": ["exactness"]})
    rows = sweep(cfg, "n", [2, 4], tmp_path)
    assert rows[0]["exit_code"] == 1 and rows[0]["error"]
    assert rows[1]["exit_code"] == 0
