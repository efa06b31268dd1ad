"""Deterministic report, CSV and manifest writers.

All numeric cells are printed with 17 significant digits and reports carry
no timestamps, so identical (config, seed) runs produce byte-identical
files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def sanitize(obj):
    """Convert numpy scalars/arrays to plain python for json output."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(sanitize(obj), indent=2, sort_keys=True) + "\n")


def check_row(name, lhs=None, rhs=None, constant=None, ratio=None, se=None,
              passed=None) -> dict:
    return {"name": name, "lhs": lhs, "rhs": rhs, "constant": constant,
            "ratio": ratio, "se": se, "passed": passed}


def write_checks_csv(path, checks) -> None:
    with open(path, "w") as fh:
        fh.write("check_name,lhs,rhs,constant,ratio,se,pass\n")
        for row in checks:
            fh.write(",".join([
                row["name"], fmt(row.get("lhs")), fmt(row.get("rhs")),
                fmt(row.get("constant")), fmt(row.get("ratio")),
                fmt(row.get("se")), fmt(row.get("passed")),
            ]) + "\n")


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if not isinstance(v, str) else v
                              for v in row) + "\n")


def write_manifest(path, spec_dict, version: str) -> None:
    write_json(path, {"package": "dissipsde", "version": version,
                      "config": spec_dict})
