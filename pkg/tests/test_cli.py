from __future__ import annotations

import json

import pytest

from mfgmaster.cli import ConfigError, config_hash, expand_sweep, load_config, main, run_config


def write(tmp_path, config, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


CERTIFY = {"command": "certify", "seed": 3, "model": {"name": "constructed"},
           "options": {"trials": 20, "steps": 3, "n_atoms": 4}}


def test_certify_passes_and_writes_manifest(tmp_path):
    out = tmp_path / "run"
    assert main(["--config", write(tmp_path, CERTIFY), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    manifest = json.loads((out / "manifest.json").read_text())
    assert report["verdict"] == "pass"
    assert report["config_hash"] == config_hash(CERTIFY) == manifest["config_hash"]
    assert manifest["exit_code"] == 0 and "numpy" in manifest["versions"]
    assert "search" in report["result"]


def test_failing_verdict_exits_two(tmp_path):
    config = {"command": "certify", "model": {"name": "lq", "params": {"q": 1.0, "c": -2.0}},
              "options": {"trials": 50}}
    assert main(["--config", write(tmp_path, config), "--out", str(tmp_path / "o")]) == 2
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["verdict"] == "fail"


def test_unknown_option_reports_pointer(tmp_path, capsys):
    config = dict(CERTIFY, options={"bogus": 1})
    assert main(["--config", write(tmp_path, config), "--out", str(tmp_path / "o")]) == 1
    assert "/options/bogus" in capsys.readouterr().err
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, {"command": "certify", "model": {"name": "nope"}}))
    assert info.value.pointer == "/model/name"


def test_malformed_json_exits_one(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) == 1


def test_runtime_error_is_reported(tmp_path):
    config = {"command": "solve-mfg", "plots": False, "model": {"name": "lq"},
              "measure": {"n": 10, "mean": 0.0, "sd": 1.0},
              "grid": {"x_min": -0.5, "x_max": 0.5, "nx": 20, "nt": 10}}
    assert run_config(config, tmp_path / "o") == 1
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["verdict"] == "error" and "ValueError" in report["error"]


def test_rerun_is_byte_identical(tmp_path):
    path = write(tmp_path, CERTIFY)
    main(["--config", path, "--out", str(tmp_path / "a")])
    main(["--config", path, "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / "o"
    main(["--config", write(tmp_path, CERTIFY), "--out", str(out), "--seed", "11"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 11 and manifest["config"]["seed"] == 11


def test_sweep_expands_dotted_keys(tmp_path):
    config = dict(CERTIFY, sweep={"options.trials": [5, 10], "seed": [0, 1]})
    children = expand_sweep(config)
    assert len(children) == 4
    assert {c["options"]["trials"] for _, c in children} == {5, 10}
    assert all("sweep" not in c for _, c in children)
    assert run_config(config, tmp_path / "s") == 0
    report = json.loads((tmp_path / "s" / "report.json").read_text())
    assert len(report["children"]) == 4
    for run in report["children"]:
        assert (tmp_path / "s" / run["dir"] / "report.json").exists()


def test_lq_oracle_writes_csv_and_plot(tmp_path):
    config = {"command": "lq-oracle", "options": {"ode_steps": 2000}}
    assert run_config(config, tmp_path / "o") == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert "coefficients.csv" in manifest["artifacts"]
    assert (tmp_path / "o" / "coefficients.png").stat().st_size > 0


def test_solve_mfg_report(tmp_path):
    config = {"command": "solve-mfg", "model": {"name": "lq"},
              "measure": {"n": 16, "mean": 1.0, "sd": 0.5},
              "grid": {"nx": 100, "nt": 50}, "solver": {"tol": 1e-9},
              "options": {"oracle_tol": 0.05, "ode_steps": 2000}}
    assert run_config(config, tmp_path / "o") == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["result"]["oracle"]["u_sup_error"] < 0.05
    header = (tmp_path / "o" / "solution.csv").read_text().splitlines()[0]
    assert header == "t,x,u,rho"
    assert (tmp_path / "o" / "solution.png").exists()


def test_shipped_configs_validate():
    from pathlib import Path
    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))
    assert paths
    for path in paths:
        assert load_config(path)["command"]
