"""CSV and JSON writers with exact round-trip of floating point values."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = ["emit_csv", "read_csv", "emit_json", "to_jsonable"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise DataError(f"refusing to write non-finite value {x}")
        return f"{x:.17g}"
    return str(x)


def emit_csv(table, path, columns=None):
    """Write ``table`` (list of dicts, or dict of equal-length columns) to ``path``.

    Floats are written with 17 significant digits so that reading them back
    with ``float`` reproduces the same bits.  An empty table still gets its
    header row when ``columns`` is given.
    """
    if isinstance(table, dict):
        columns = list(columns or table.keys())
        n = len(next(iter(table.values()), []))
        rows = [{c: table[c][k] for c in columns} for k in range(n)]
    else:
        rows = list(table)
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(columns)
        for r in rows:
            wr.writerow([_fmt(r[c]) for c in columns])
    return path


def read_csv(path) -> list[dict]:
    """Read a CSV written by :func:`emit_csv`; numeric cells become floats."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                try:
                    rec[k] = float(v)
                except ValueError:
                    rec[k] = v
            out.append(rec)
    return out


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return x
    return obj


def emit_json(document, path):
    """Write ``document`` as JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(document), sort_keys=True, indent=2) + "\n")
    return path
