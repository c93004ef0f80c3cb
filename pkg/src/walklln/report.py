"""Deterministic CSV/JSON writers.

Floats are written with ``repr`` (shortest round-trip form), keys in a fixed
order, and nothing time- or host-dependent goes into these files.  Timings
and timestamps live in the run manifest only.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .experiments import Report, Row

CSV_SCHEMA = "walklln.experiment.csv/1"
SUMMARY_SCHEMA = "walklln.summary/1"
MANIFEST_SCHEMA = "walklln.manifest/1"
CSV_FIELDS = ["checkpoint_n", "replica_count", "statistic", "mean", "variance",
              "ci_halfwidth", "theory_target", "abs_gap"]


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples to JSON-safe builtins; NaN -> null."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if math.isnan(v) or math.isinf(v) else v
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(plain(obj), indent=2, allow_nan=False) + "\n"


def rows_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {CSV_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([r.checkpoint_n, r.stats.count, r.statistic, _num(r.stats.mean), _num(r.stats.variance),
                    _num(r.stats.ci_halfwidth), _num(r.theory_target), _num(r.abs_gap)])
    return buf.getvalue()


def read_rows_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def summary(report: Report, subcommand: str, config_echo: dict) -> dict:
    g = report.gamma
    return {
        "schema": SUMMARY_SCHEMA,
        "subcommand": subcommand,
        "config": config_echo,
        "gamma": None if g is None else {**g.as_dict(), "note": report.gamma_note},
        "verdicts": dict(report.verdicts),
        "passed": report.passed,
        "details": report.details,
    }


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path
