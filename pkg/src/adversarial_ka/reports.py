"""Deterministic JSON and CSV output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["to_jsonable", "dumps", "write_json", "write_csv", "emit_plot_data",
           "ITERATION_COLUMNS", "PROBE_COLUMNS"]

ITERATION_COLUMNS = ("m", "N", "residual_norm", "g_norm", "g_lip", "knots", "min_gap",
                     "lambda_achieved", "solid_variation_flag", "offgrid_residual_norm")
PROBE_COLUMNS = ("t", "min_gap", "lip", "adjacent_ratio", "grid_error", "reuse_error",
                 "crossings", "collision", "consistent")


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_csv(path, columns, rows) -> Path:
    """``rows`` are dicts (looked up by column) or sequences in column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c, "") for c in columns]
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for v in row])
    return path


def emit_plot_data(report, outdir) -> list[Path]:
    """Gnuplot-ready tables: error vs iteration for runs, Lipschitz and gap vs ``t`` for probes."""
    outdir = Path(outdir)
    rows = getattr(report, "rows", [])
    if getattr(report, "mode", None) is not None:
        return [write_csv(outdir / "error-vs-iteration.csv", ("m", "residual_norm", "offgrid_residual_norm"),
                          rows)]
    return [write_csv(outdir / "lip-vs-t.csv", ("t", "lip"), rows),
            write_csv(outdir / "gap-vs-t.csv", ("t", "min_gap"), rows)]
