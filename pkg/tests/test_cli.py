import json
from pathlib import Path

import pytest

from spinlab.cli import main
from spinlab.graphs import read_graph

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_cfg(tmp_path, **kw):
    cfg = {"model": {"kind": "ising", "params": {"beta": 0.2}, "graph": {"family": "path", "params": [4]}}, "suites": ["exactness"]}
    cfg.update(kw)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_run_passes_and_writes(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out.json"
    assert main(["run", str(cfg), "-o", str(out)]) == 0
    assert out.exists() and out.with_suffix(".csv").exists()
    assert "PASS exactness/normalisation" in capsys.readouterr().out


def test_empty_suite_list_exit_zero(tmp_path):
    assert main(["run", str(write_cfg(tmp_path, suites=[])), "-o", str(tmp_path / "o.json")]) == 0


def test_config_errors_exit_two(tmp_path):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(write_cfg(tmp_path, extra=1))]) == 2


def test_seed_override_changes_sampled_output(tmp_path):
    cfg = write_cfg(tmp_path, suites=["pinsker"], seed=1)
    a, b, c = (tmp_path / f"{k}.json" for k in "abc")
    main(["run", str(cfg), "-o", str(a)])
    main(["run", str(cfg), "-o", str(b)])
    main(["run", str(cfg), "--seed", "2", "-o", str(c)])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_gen_graph(tmp_path):
    out = tmp_path / "g.txt"
    assert main(["gen-graph", "grid", "2", "3", "-o", str(out)]) == 0
    g, bnd = read_graph(out)
    assert g.n == 6 and g.m == 7 and bnd == {}
    assert main(["gen-graph", "torus", "3", "-o", str(out)]) == 2


def test_sweep_command(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["sweep", str(cfg), "--param", "beta", "--grid", "0.1:0.2:0.3", "-o", str(tmp_path / "sw")]) == 0
    assert (tmp_path / "sw" / "sweep.csv").exists()
    assert capsys.readouterr().out.count("beta=") == 2


def test_shipped_config_with_graph_file(tmp_path):
    from spinlab.harness import ExperimentConfig

    cfg = ExperimentConfig.load(CONFIGS / "ising_boundary_full.json")
    sys_ = cfg.build_system()
    assert sys_.n == 4 and sys_.boundary_condition == {4: 1}


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json") if p.name != "flip_params.json"))
def test_shipped_configs_load(name):
    from spinlab.harness import ExperimentConfig

    ExperimentConfig.load(CONFIGS / name).build_system()
