"""Report files: JSON lines and a flat CSV.

JSON lines
    line 1    ``{"record": "header", "schema": SCHEMA, ...}`` with the config,
              its hash, the peak system, fitted rates and a ``meta`` block
              (timestamp, stage timings) that is the only nondeterministic part;
    then      one ``{"record": "row", ...}`` per branch point;
    then      one ``{"record": "assertion", ...}`` per acceptance check.

CSV
    line 1    ``#`` followed by the schema token;
    line 2    column names: ``config_hash, lambda, s, R, Sigma`` and then the
              per-peak ``peak<j>_<key>``, per-eigenvalue ``mu<n>_<key>`` and
              extra columns in order of first appearance;
    then      one line per branch point, floats written with ``repr``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict

from .diagnostics import DiagnosticsRow

SCHEMA = "gelfandlab-report/1"
BASE_COLUMNS = ["config_hash", "lambda", "s", "R", "Sigma"]


class SchemaError(ValueError):
    pass


def _clean(x):
    """numpy scalars and arrays to plain JSON values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "tolist"):
        return _clean(x.tolist())
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _restore(x):
    """null (written for NaN) back to NaN."""
    if isinstance(x, dict):
        return {k: _restore(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_restore(v) for v in x]
    return float("nan") if x is None else x


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), allow_nan=False)


def header(report) -> dict:
    return {"record": "header", "schema": SCHEMA, "name": report.name,
            "config_hash": report.config_hash, "config": report.config,
            "peak_system": report.peak_system, "critical_points": report.critical_points,
            "fits": report.fits, "truncated": report.truncated, "reason": report.reason,
            "passed": report.passed, "meta": report.meta}


def columns(rows) -> list[str]:
    cols = list(BASE_COLUMNS)
    seen = set(cols)
    for r in rows:
        for k in r.flat():
            if k not in seen:
                seen.add(k)
                cols.append(k)
    return cols


def emit(report, path, format: str = "jsonl") -> None:
    """Write ``report`` to ``path`` as ``jsonl`` or ``csv``."""
    if format == "jsonl":
        with open(path, "w") as fh:
            fh.write(_dumps(header(report)) + "\n")
            for r in report.rows:
                fh.write(_dumps({"record": "row", **r.to_dict()}) + "\n")
            for a in report.assertions:
                fh.write(_dumps({"record": "assertion", **asdict(a)}) + "\n")
    elif format == "csv":
        cols = columns(report.rows)
        with open(path, "w", newline="") as fh:
            fh.write(f"#{SCHEMA}\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for r in report.rows:
                flat = r.flat()
                w.writerow([_cell(flat.get(c, "")) for c in cols])
    else:
        raise ValueError(f"unknown report format {format!r}")


def _cell(v):
    if isinstance(v, float):
        return repr(float(v))
    return v


def read_jsonl(path) -> dict:
    """Inverse of ``emit(..., 'jsonl')``: header dict, rows and assertions."""
    out = {"header": None, "rows": [], "assertions": []}
    with open(path) as fh:
        for i, line in enumerate(fh):
            rec = json.loads(line)
            kind = rec.pop("record", None)
            if i == 0:
                if kind != "header" or rec.get("schema") != SCHEMA:
                    raise SchemaError(f"{path}: expected schema {SCHEMA!r}, got {rec.get('schema')!r}")
                out["header"] = rec
            elif kind == "row":
                out["rows"].append(DiagnosticsRow(**_restore(rec)))
            elif kind == "assertion":
                out["assertions"].append(rec)
            else:
                raise SchemaError(f"{path}:{i + 1}: unknown record {kind!r}")
    if out["header"] is None:
        raise SchemaError(f"{path}: empty report file")
    return out


def read_csv(path) -> list[dict]:
    """Rows of a CSV report as dicts; numeric cells become floats."""
    with open(path, newline="") as fh:
        token = fh.readline().rstrip("\n")
        if token != f"#{SCHEMA}":
            raise SchemaError(f"{path}: expected schema token #{SCHEMA}, got {token!r}")
        rows = []
        for rec in csv.DictReader(fh):
            rows.append({k: _parse_cell(k, v) for k, v in rec.items() if v != ""})
    return rows


def _parse_cell(key, v):
    if key == "config_hash":
        return v
    try:
        return float(v)
    except ValueError:
        return v
