"""Run artifacts: manifest.json, curves.csv, bounds.json and plot_data.json.

Every file goes through a temp-then-rename write, so a failed run leaves no
half-written output, and nothing time-dependent is written, so the same
inputs re-emit the same bytes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import subprocess
from typing import Optional

import numpy as np

from src.storage.run_store import RunStore, atomic_write_json, atomic_write_text

from .config import ExperimentConfig

logger = logging.getLogger("harness.report")

MANIFEST_VERSION = 1
REPORT_FILES = ("manifest.json", "curves.csv", "bounds.json", "plot_data.json")


def git_describe() -> str:
    root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=root,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings 'inf', '-inf' and 'nan'."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def curves_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def plot_data(kind: str, columns, rows) -> dict:
    """Vega-lite spec with the curves inlined, log-log when the curve is an error curve."""
    values = [dict(zip(columns, jsonable(row))) for row in rows]
    y_fields = [c for c in columns if c != "n"]
    log_y = kind == "rate"
    return {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "description": f"twoscale {kind} curves",
        "data": {"values": values},
        "transform": [{"fold": y_fields, "as": ["series", "value"]}],
        "mark": "line",
        "encoding": {
            "x": {"field": "n", "type": "quantitative", "scale": {"type": "log"}},
            "y": {"field": "value", "type": "quantitative", "scale": {"type": "log" if log_y else "linear"}},
            "color": {"field": "series", "type": "nominal"},
        },
    }


def manifest(result, cfg: ExperimentConfig) -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "kind": result.kind,
        "config": cfg.to_dict(),
        "master_seed": cfg.seed,
        "trial_spawn_keys": result.spawn_keys,
        "build": git_describe(),
        "event": result.event,
        "summary": result.summary(),
    }


def emit_report(result, cfg: ExperimentConfig, out_dir: str, registry: Optional[str] = None) -> dict:
    """Write the four run files into out_dir and return their paths by name."""
    os.makedirs(out_dir, exist_ok=True)
    rows = result.curve_rows()
    paths = {name: os.path.join(out_dir, name) for name in REPORT_FILES}

    atomic_write_text(paths["curves.csv"], curves_csv(result.curve_columns, rows))
    atomic_write_json(paths["bounds.json"], jsonable(result.bounds_dict()))
    atomic_write_json(paths["plot_data.json"], plot_data(result.kind, result.curve_columns, rows))
    # the manifest goes last; its presence marks a complete report
    atomic_write_json(paths["manifest.json"], jsonable(manifest(result, cfg)))
    logger.info(f"{result.kind} report written to '{out_dir}'")

    if registry:
        with RunStore(db_file=registry) as store:
            store.initialize_database()
            store.record_run(result.kind, cfg.to_dict(), cfg.seed, os.path.abspath(out_dir),
                             jsonable(result.summary()))
    return paths
