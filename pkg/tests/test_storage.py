import json
import os

import pytest

from src.storage import RunStore, atomic_write_json, atomic_write_text, config_hash


@pytest.fixture
def store(tmp_path):
    with RunStore(db_file=str(tmp_path / "nested" / "runs.db")) as s:
        s.initialize_database()
        yield s


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 64


def test_record_and_fetch(store):
    cfg = {"trials": 10, "seed": 1}
    assert store.record_run("lockin", cfg, 1, "out", {"frequency": 1.0})
    row = store.get_run("lockin", config_hash(cfg))
    assert row["master_seed"] == 1 and row["out_dir"] == "out"
    assert json.loads(row["summary_json"]) == {"frequency": 1.0}
    assert store.get_run("rate", config_hash(cfg)) is None


def test_rerun_updates_in_place(store):
    cfg = {"trials": 10, "seed": 1}
    store.record_run("lockin", cfg, 1, "out", {"frequency": 1.0})
    first = store.get_run("lockin", config_hash(cfg))
    store.record_run("lockin", cfg, 1, "out2", {"frequency": 0.9})
    again = store.get_run("lockin", config_hash(cfg))
    assert again["out_dir"] == "out2"
    assert again["first_seen_timestamp"] == first["first_seen_timestamp"]
    assert len(store.list_runs("lockin")) == 1


def test_list_runs_by_kind(store):
    store.record_run("lockin", {"seed": 1}, 1, "a", {})
    store.record_run("rate", {"seed": 1}, 1, "b", {})
    store.record_run("rate", {"seed": 2}, 2, "c", {})
    assert [r["out_dir"] for r in store.list_runs()] == ["a", "b", "c"]
    assert [r["out_dir"] for r in store.list_runs("rate")] == ["b", "c"]


def test_atomic_writes(tmp_path):
    path = tmp_path / "deep" / "bounds.json"
    atomic_write_json(str(path), {"b": 1, "a": [0.5]})
    assert path.read_text(encoding="utf-8") == '{\n  "a": [\n    0.5\n  ],\n  "b": 1\n}\n'
    atomic_write_text(str(path), "x\n")
    assert path.read_text(encoding="utf-8") == "x\n"
    assert os.listdir(tmp_path / "deep") == ["bounds.json"]


def test_failed_write_keeps_the_old_file(tmp_path):
    path = tmp_path / "manifest.json"
    atomic_write_json(str(path), {"ok": True})
    with pytest.raises(TypeError):
        atomic_write_json(str(path), {"bad": object()})
    assert json.loads(path.read_text(encoding="utf-8")) == {"ok": True}
    assert os.listdir(tmp_path) == ["manifest.json"]
