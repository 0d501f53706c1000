import csv
import json
import subprocess
import sys
import warnings

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from poiseuille_lab.errors import ConfigError, RunError
from poiseuille_lab.harness import ExperimentConfig, from_dict, loads, run, sweep
from poiseuille_lab.harness import runner
from poiseuille_lab.harness.cli import main
from poiseuille_lab.harness.config import apply_overrides, parse_override


def quick(tmp_path, kind="linear-decay", **over):
    d = {"grid": {"Ly": 6.0, "Ny": 127},
         "physics": {"nu": 1e-2, "k": 1},
         "stepper": {"samples": 100},
         "experiment": {"kind": kind},
         "output_dir": str(tmp_path / "out")}
    cfg = from_dict(d)
    return cfg.replace(**over) if over else cfg


# --------------------------------------------------------------------------
# configuration


def test_defaults_validate():
    cfg = ExperimentConfig()
    assert from_dict(cfg.to_dict()) == cfg


@given(nu=st.floats(1e-6, 1.0), k=st.integers(1, 32), eps=st.floats(1e-4, 0.0277),
       seed=st.integers(0, 2 ** 31), nus=st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=5),
       kind=st.sampled_from(["linear-decay", "functional-audit", "identities"]))
def test_yaml_round_trip(nu, k, eps, seed, nus, kind):
    cfg = from_dict({"physics": {"nu": nu, "k": k, "nu_list": nus}, "hypo": {"epsilon": eps},
                     "experiment": {"kind": kind}, "seed": seed})
    back = loads(cfg.to_yaml())
    assert back == cfg
    assert back.hash() == cfg.hash()


def test_hash_ignores_output_dir_only():
    a = ExperimentConfig()
    assert a.replace(output_dir="elsewhere").hash() == a.hash()
    assert a.replace(**{"physics.nu": 2e-3}).hash() != a.hash()
    assert a.replace(seed=1).hash() != a.hash()


@pytest.mark.parametrize("raw,path", [
    ({"hypo": {"epsilon": 0.05}}, "hypo.epsilon"),
    ({"physics": {"nu_list": []}}, "physics.nu_list"),
    ({"physics": {"nu": -1}}, "physics.nu"),
    ({"physics": {"nu_list": [1e-3, "x"]}}, "physics.nu_list[1]"),
    ({"grid": {"Ny": 2}}, "grid.Ny"),
    ({"grid": {"Kmax": 8, "nx": 16}}, "grid.nx"),
    ({"grid": {"nonsense": 1}}, "grid.nonsense"),
    ({"experiment": {"kind": "magic"}}, "experiment.kind"),
    ({"experiment": {"heat_control": "yes"}}, "experiment.heat_control"),
    ({"stepper": {"scheme": "rk4"}}, "stepper.scheme"),
    ({"physics": {"k": 0}, "experiment": {"kind": "functional-audit"}}, "physics.k"),
    ({"extra": 1}, "extra"),
])
def test_validation_errors_name_the_field(raw, path):
    with pytest.raises(ConfigError) as info:
        from_dict(raw)
    assert info.value.path == path
    assert path in str(info.value)


def test_functional_audit_with_large_epsilon_rejected():
    with pytest.raises(ConfigError, match="1/36"):
        from_dict({"hypo": {"epsilon": 0.05}, "experiment": {"kind": "functional-audit"}})


def test_override_parsing():
    assert parse_override("physics.nu=1e-4") == ("physics.nu", 1e-4)
    assert parse_override("physics.nu_list=[1e-2, 1e-3]") == ("physics.nu_list", [1e-2, 1e-3])
    assert parse_override("experiment.heat_control=false") == ("experiment.heat_control", False)
    with pytest.raises(ConfigError):
        parse_override("physics.nu")
    cfg = apply_overrides(ExperimentConfig(), ["physics.k=3", "stepper.dt=0.5"])
    assert cfg.physics.k == 3 and cfg.stepper.dt == 0.5
    with pytest.raises(ConfigError) as info:
        apply_overrides(ExperimentConfig(), ["physics.mu=1"])
    assert info.value.path == "physics.mu"


def test_invalid_yaml():
    with pytest.raises(ConfigError):
        loads("grid: [unclosed")


# --------------------------------------------------------------------------
# runs


def test_linear_decay_run_artifacts(tmp_path):
    cfg = quick(tmp_path)
    rec = run(cfg)
    assert rec.status == "pass" and rec.exit_code == 0
    out = tmp_path / "out"
    with open(out / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["nu", "k", "t", "norm", "phi"]
    side = json.loads((out / "results.csv.json").read_text())
    assert side["config_hash"] == cfg.hash() == rec.config_hash
    summary = json.loads((out / "summary.json").read_text())
    fit = summary["payload"]["cells"][0]["decay_fit"]
    assert fit["accepted"] and fit["c_fit"] > 0
    assert yaml.safe_load((out / "config.yaml").read_text()) == cfg.to_dict()
    runs = (out / "runs.jsonl").read_text().splitlines()
    assert len(runs) == 1 and json.loads(runs[0])["config_hash"] == cfg.hash()


def test_determinism_byte_identical(tmp_path):
    cfg = quick(tmp_path, **{"experiment.datum": "random", "seed": 7})
    a = run(cfg.replace(output_dir=str(tmp_path / "a")))
    b = run(cfg.replace(output_dir=str(tmp_path / "b")))
    assert a.config_hash == b.config_hash
    for name in ("results.csv", "results.csv.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    c = run(cfg.replace(output_dir=str(tmp_path / "c"), seed=8))
    assert (tmp_path / "c" / "results.csv").read_bytes() != (tmp_path / "a" / "results.csv").read_bytes()
    assert c.config_hash != a.config_hash


def test_threads_do_not_change_payload(tmp_path):
    cfg = quick(tmp_path, **{"physics.nu_list": [1e-2, 5e-3]})
    run(cfg.replace(output_dir=str(tmp_path / "one")), threads=1)
    run(cfg.replace(output_dir=str(tmp_path / "two")), threads=2)
    assert (tmp_path / "one" / "results.csv").read_bytes() == \
        (tmp_path / "two" / "results.csv").read_bytes()


def test_duplicate_values_warn(tmp_path):
    cfg = quick(tmp_path, **{"physics.nu_list": [1e-2, 1e-2]})
    with pytest.warns(UserWarning, match="duplicate"):
        rec = sweep(cfg)
    assert len(rec.payload["cells"]) == 1


def test_sweep_needs_an_axis(tmp_path):
    with pytest.raises(ConfigError):
        sweep(quick(tmp_path))


def test_sweep_plan_four_viscosities():
    cfg = from_dict({"physics": {"nu_list": [1e-2, 1e-3, 1e-4, 1e-5]},
                     "experiment": {"kind": "linear-decay"}})
    cells, axes = runner._plan(cfg, sweep=True)
    assert [p["nu"] for _, p in cells] == [1e-2, 1e-3, 1e-4, 1e-5]
    assert axes == ["nu"]


def _fake_cell(cfg, nu, k, **_):
    ok = nu > 5e-3
    return runner._cell({"fit_accepted": ok}, [{"nu": nu, "k": k, "c_fit": 0.1}],
                        payload={"decay_fit": {"c_fit": 0.1}})


def test_partial_status(tmp_path, monkeypatch):
    monkeypatch.setitem(runner._CELLS, "linear-decay", _fake_cell)
    rec = sweep(quick(tmp_path, **{"physics.nu_list": [1e-2, 1e-3]}))
    assert rec.status == "partial"
    assert rec.exit_code != 0
    assert rec.failures[0]["params"]["nu"] == 1e-3


def test_single_run_error_carries_context(tmp_path, monkeypatch):
    def broken(cfg, nu, k, **_):
        raise ArithmeticError("boom")
    monkeypatch.setitem(runner._CELLS, "linear-decay", broken)
    with pytest.raises(RunError) as info:
        run(quick(tmp_path))
    assert info.value.context["nu"] == 1e-2
    assert info.value.context["kind"] == "linear-decay"


def test_identities_run(tmp_path):
    rec = run(quick(tmp_path, "identities", **{"stepper.T": 2.0, "stepper.dt": 0.02}))
    assert rec.verdicts["residual"] and rec.verdicts["convergence"]


def test_threshold_run_writes_checkpoints(tmp_path):
    cfg = quick(tmp_path, "nonlinear-threshold",
                **{"grid.Ny": 95, "grid.Kmax": 2, "physics.nu": 1e-2, "stepper.T": 10.0,
                   "experiment.checkpoint_every": 200})
    rec = run(cfg)
    bins = sorted((tmp_path / "out" / "checkpoints").rglob("*.bin"))
    assert bins
    for b in bins:
        side = json.loads(b.with_suffix(".json").read_text())
        assert side["meta"]["config_hash"] == rec.config_hash
    assert (tmp_path / "out" / "thresholds.csv").exists()
    assert (tmp_path / "out" / "series.csv.json").exists()


# --------------------------------------------------------------------------
# command line


def _write(tmp_path, cfg):
    p = tmp_path / "cfg.yaml"
    cfg.save(p)
    return str(p)


def test_cli_validate_and_exit_codes(tmp_path, capsys):
    cfg = quick(tmp_path)
    path = _write(tmp_path, cfg)
    assert main(["validate-config", "--config", path]) == 0
    assert cfg.hash() in capsys.readouterr().out
    bad = tmp_path / "bad.yaml"
    bad.write_text("hypo:\n  epsilon: 0.05\n")
    assert main(["validate-config", "--config", str(bad)]) == 2
    assert "hypo.epsilon" in capsys.readouterr().err
    assert main(["linear-decay", "--config", path, "--override", "physics.nu_list=[]"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["sweep"]) == 2


def test_cli_run_and_failure_exit(tmp_path, capsys, monkeypatch):
    path = _write(tmp_path, quick(tmp_path))
    out = tmp_path / "cli"
    assert main(["linear-decay", "--config", path, "--output", str(out), "--seed", "3"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert json.loads((out / "summary.json").read_text())["config"]["seed"] == 3
    monkeypatch.setitem(runner._CELLS, "linear-decay", _fake_cell)
    assert main(["sweep", "--config", path, "--override", "physics.nu_list=[1e-2, 1e-3]",
                 "--output", str(tmp_path / "p")]) == 1


def test_module_entry_point(tmp_path):
    path = _write(tmp_path, quick(tmp_path))
    res = subprocess.run([sys.executable, "-m", "poiseuille_lab", "validate-config",
                          "--config", path], capture_output=True, text=True)
    assert res.returncode == 0
    assert "valid linear-decay configuration" in res.stdout
