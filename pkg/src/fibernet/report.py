"""Run outputs: load-displacement CSV, JSON summary and hinge state dumps.

The CSV starts with a version comment line, then a header::

    # fibernet-curve v1
    step,u,reaction,stress,iters,n_ruptured,min_beta

Floats are written with ``repr`` so that identical runs produce identical
bytes and reading a file back recovers every value exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .solver import SolveReport

CURVE_VERSION = "fibernet-curve v1"
CURVE_COLUMNS = ("step", "u", "reaction", "stress", "iters", "n_ruptured", "min_beta")
CURVE_TYPES = (int, float, float, float, int, int, float)
STATE_VERSION = "fibernet-state v1"
STATE_COLUMNS = ("element", "xi", "alpha", "ruptured")


class SchemaError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def curve_csv(report: SolveReport) -> str:
    buf = io.StringIO()
    buf.write(f"# {CURVE_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    w.writerow([0, _fmt(0.0), _fmt(0.0), _fmt(0.0), 0, 0, _fmt(math.nan)])
    for r in report.records:
        w.writerow([r.step, _fmt(r.u), _fmt(r.reaction), _fmt(r.stress), r.iterations,
                    r.n_ruptured, _fmt(r.min_beta)])
    return buf.getvalue()


def write_curve(report: SolveReport, path) -> Path:
    path = Path(path)
    path.write_text(curve_csv(report))
    return path


def read_curve(path) -> dict[str, np.ndarray]:
    """Parse a curve CSV, checking version line, header and column types."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != f"# {CURVE_VERSION}":
        raise SchemaError(f"{path}: missing '# {CURVE_VERSION}' header")
    rows = list(csv.reader(lines[1:]))
    if not rows or tuple(rows[0]) != CURVE_COLUMNS:
        raise SchemaError(f"{path}: unexpected columns {rows[0] if rows else None}")
    cols = {name: [] for name in CURVE_COLUMNS}
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != len(CURVE_COLUMNS):
            raise SchemaError(f"{path}: line {k + 1} has {len(row)} fields")
        for name, typ, val in zip(CURVE_COLUMNS, CURVE_TYPES, row):
            try:
                cols[name].append(typ(val))
            except ValueError as exc:
                raise SchemaError(f"{path}: line {k + 1}, column {name}: {val!r}") from exc
    out = {name: np.array(vals, dtype=float if typ is float else np.int64)
           for (name, vals), typ in zip(cols.items(), CURVE_TYPES)}
    if np.any(np.diff(out["u"]) < 0):
        raise SchemaError(f"{path}: displacement column is not monotone")
    return out


def write_states(path, step: int, xi, alpha, ruptured) -> Path:
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# {STATE_VERSION} step={int(step)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATE_COLUMNS)
    for e, (x, a, r) in enumerate(zip(xi, alpha, ruptured)):
        w.writerow([e, _fmt(x), _fmt(a), int(bool(r))])
    path.write_text(buf.getvalue())
    return path


def read_states(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(f"# {STATE_VERSION}"):
        raise SchemaError(f"{path}: missing '# {STATE_VERSION}' header")
    rows = list(csv.reader(lines[1:]))
    if tuple(rows[0]) != STATE_COLUMNS:
        raise SchemaError(f"{path}: unexpected columns {rows[0]}")
    data = np.array(rows[1:], dtype=float).reshape(-1, 4)
    return {"element": data[:, 0].astype(np.int64), "xi": data[:, 1], "alpha": data[:, 2],
            "ruptured": data[:, 3].astype(bool)}


def summary_json(report: SolveReport, config: dict, extra: dict | None = None) -> str:
    """Run summary; wall time is left out so reruns are byte-identical."""
    doc = {"format": "fibernet-summary", "version": 1, "config": config, **report.summary()}
    if extra:
        doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"
