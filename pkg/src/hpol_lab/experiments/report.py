"""Writes a Report to an output directory.

The four tables are always written (header only when an experiment has no
rows for one), so downstream scripts can rely on the file set.  CSV cells
use ``repr`` for floats, which makes equal runs byte-identical; timings
live only in summary.json.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

TABLES = ("counts", "level_curve", "witness_pairs")
LEVEL_CURVE_HEADER = ["index", "c1", "c2", "alpha", "rho1", "rho2", "rational", "case",
                      "face_minus1", "face_minus2", "face_plus1", "face_plus2"]


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        x = float(x)
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if rows and isinstance(rows[0], dict):
            header = header or list(rows[0])
            w.writerow(header)
            w.writerows([[_cell(r[h]) for h in header] for r in rows])
        else:
            w.writerow(header or [])
            w.writerows([[_cell(v) for v in r] for r in rows])


def write_report(report, out_dir):
    """Write summary.json and the CSV tables; returns the list of paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in TABLES:
        header, rows = report.tables.get(name, (None, []))
        if header is None and name == "level_curve":
            header = LEVEL_CURVE_HEADER
        path = out / f"{name}.csv"
        write_table(path, header, rows)
        written.append(path)
    summary = {
        "experiment": report.experiment,
        "passed": report.passed,
        "elapsed_seconds": report.elapsed,
        "config": report.config.serialize().splitlines(),
        "result": report.summary,
        "files": [p.name for p in written],
    }
    path = out / "summary.json"
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written
