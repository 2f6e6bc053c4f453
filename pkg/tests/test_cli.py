import json
import logging
import os

import pytest

from src.cli.main import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, parse_and_dispatch
from src.common.errors import HorizonExceeded
from src.storage import RunStore, config_hash

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCALAR_SPEC = os.path.join(ROOT, "configs", "scalar_spec.json")
SCALAR_BOUNDS = ["bounds", "--spec", SCALAR_SPEC, "--alpha", "0.75", "--beta", "0.5",
                 "--r1in", "1", "--r2in", "1", "--r2out", "2"]


@pytest.fixture(autouse=True)
def no_registry(monkeypatch):
    monkeypatch.setenv("TWOSCALE_DB", "")
    monkeypatch.setenv("TWOSCALE_WORKERS", "1")


def test_help_exits_cleanly(capsys):
    assert parse_and_dispatch(["--help"]) == EXIT_OK
    assert "lockin" in capsys.readouterr().out


def test_unknown_command_is_a_usage_error():
    assert parse_and_dispatch(["sweep"]) == EXIT_CONFIG


def test_missing_spec_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    code = parse_and_dispatch(["bounds", "--spec", missing, "--eps", "0.5", "--alpha", "0.75", "--beta", "0.5",
                               "--r1in", "1", "--r2in", "1", "--r2out", "2"])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert missing in err and "config.ConfigError" in err


def test_epsilon_out_of_range(capsys):
    assert parse_and_dispatch(SCALAR_BOUNDS + ["--eps", "0"]) == EXIT_CONFIG
    assert "EpsilonOutOfRange" in capsys.readouterr().err


def test_bounds_needs_a_schedule(capsys):
    code = parse_and_dispatch(["bounds", "--spec", SCALAR_SPEC, "--eps", "0.5", "--r1in", "1", "--r2in", "1",
                               "--r2out", "2"])
    assert code == EXIT_CONFIG
    assert "--alpha" in capsys.readouterr().err


def test_bounds_json(tmp_path, capsys):
    out = tmp_path / "bounds"
    assert parse_and_dispatch(SCALAR_BOUNDS + ["--eps", "0.5", "--out", str(out)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["lockin_bound"]["noiseless"] is True
    assert report["lockin_bound"]["bound"] == 1.0
    assert [e["name"] for e in report["ledger"]["entries"]][0] == "K1"
    # eps = 0.5 is past R1in / 4, so the projected bound is skipped
    assert "EpsilonOutOfRange" in report["projected"]["skipped"]
    assert report["projected"]["assumptions"]["w_ok"] is False
    with open(out / "bounds.json", encoding="utf-8") as fh:
        assert json.load(fh) == report


def test_bounds_table_and_csv(capsys):
    assert parse_and_dispatch(SCALAR_BOUNDS + ["--eps", "0.5", "--format", "table"]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("ledger\n") and "lock-in bound" in text
    assert parse_and_dispatch(SCALAR_BOUNDS + ["--eps", "0.5", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "section,name,value"
    assert any(line.startswith("ledger.entries,L1a,") for line in lines)


def test_bounds_sweep_over_n0(tmp_path, capsys):
    args = SCALAR_BOUNDS + ["--eps", "0.5", "--m1", "0.01", "--m2", "0.01", "--sweep", "n0", "--out", str(tmp_path)]
    assert parse_and_dispatch(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n0,lockin_bound,vacuous,N0,N1"
    assert len(lines) == 13
    assert (tmp_path / "sweep.csv").read_text(encoding="utf-8").splitlines() == lines


def test_projected_bound_rounds_n0_up_to_a_power_of_two(caplog, capsys):
    args = ["bounds", "--spec", SCALAR_SPEC, "--alpha", "0.75", "--beta", "0.5", "--r1in", "1", "--r2in", "3",
            "--r2out", "6", "--eps", "0.2"]
    with caplog.at_level(logging.WARNING, logger="cli.main"):
        assert parse_and_dispatch(args + ["--n0", "96"]) == EXIT_OK
    n0_prime = json.loads(capsys.readouterr().out)["projected"]["bound"]["n0_prime"]
    assert n0_prime != 96 and n0_prime & (n0_prime - 1) == 0
    assert "--n0 96 is not a power of two" in caplog.text

    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="cli.main"):
        assert parse_and_dispatch(args + ["--n0", "128"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["projected"]["bound"]["n0_prime"] == 128
    assert "not a power of two" not in caplog.text


def test_lockin_command(tmp_path, write_json, noiseless_lockin, capsys):
    config = write_json("lockin.json", noiseless_lockin)
    out = tmp_path / "run"
    assert parse_and_dispatch(["lockin", "--config", config, "--out", str(out)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["frequency"] == 1.0 and summary["meets_bound"] is True
    assert (out / "manifest.json").exists()

    replay = tmp_path / "replay"
    assert parse_and_dispatch(["lockin", "--config", str(out / "manifest.json"), "--out", str(replay)]) == EXIT_OK
    for name in ("curves.csv", "manifest.json"):
        assert (out / name).read_bytes() == (replay / name).read_bytes()


def test_lockin_records_runs_in_the_registry(tmp_path, write_json, noiseless_lockin, monkeypatch, capsys):
    db = tmp_path / "registry.db"
    monkeypatch.setenv("TWOSCALE_DB", str(db))
    config = write_json("lockin.json", noiseless_lockin)
    assert parse_and_dispatch(["lockin", "--config", config, "--out", str(tmp_path / "run")]) == EXIT_OK
    capsys.readouterr()
    with RunStore(db_file=str(db)) as store:
        row = store.get_run("lockin", config_hash(noiseless_lockin))
        assert row is not None
        assert json.loads(row["summary_json"])["frequency"] == 1.0


def test_bad_experiment_config(write_json, noiseless_lockin, tmp_path, capsys):
    config = write_json("bad.json", dict(noiseless_lockin, colour="red"))
    assert parse_and_dispatch(["lockin", "--config", config, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_short_explicit_schedule_is_a_config_error(write_json, noiseless_lockin, tmp_path, capsys):
    schedule = {"kind": "explicit", "alphas": [0.1] * 100, "betas": [0.2] * 100}
    config = write_json("short.json", dict(noiseless_lockin, schedule=schedule))
    assert parse_and_dispatch(["lockin", "--config", config, "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "explicit schedule" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def _exceeds(task):
    raise HorizonExceeded(499, 100)


def test_runtime_failure_in_a_trial_exits_3(write_json, noiseless_lockin, tmp_path, monkeypatch, capsys):
    monkeypatch.setattr("src.harness.lockin.run_trial", _exceeds)
    config = write_json("lockin.json", noiseless_lockin)
    out = tmp_path / "run"
    assert parse_and_dispatch(["lockin", "--config", config, "--out", str(out)]) == EXIT_RUNTIME
    captured = capsys.readouterr()
    assert "model.HorizonExceeded" in captured.err
    assert captured.out == ""
    assert not (out / "manifest.json").exists()


def test_rate_needs_projection(write_json, noiseless_lockin, tmp_path, capsys):
    config = write_json("rate.json", noiseless_lockin)
    assert parse_and_dispatch(["rate", "--config", config, "--out", str(tmp_path / "rate")]) == EXIT_CONFIG
    assert "projected" in capsys.readouterr().err


def test_gtd_command(tmp_path, capsys):
    out = tmp_path / "gtd"
    code = parse_and_dispatch(["gtd", "--variant", "tdc", "--states", "6", "--dim", "2", "--seed", "3",
                               "--out", str(out)])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["variant"] == "tdc" and summary["d"] == 2
    assert summary["x1_closed_form_max_gap"] < 1e-10
    assert sorted(os.listdir(out)) == ["gtd.json", "mrp.json", "spec.json"]
    with open(out / "spec.json", encoding="utf-8") as fh:
        assert json.load(fh)["d"] == 2


def test_gtd_rejects_unknown_variants(capsys):
    assert parse_and_dispatch(["gtd", "--variant", "lstd"]) == EXIT_CONFIG
    assert "gtd0, gtd2 or tdc" in capsys.readouterr().err
