"""Deterministic JSON/CSV emitters."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from . import __version__

TOOLKIT = "poincare_lab"


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Path, obj) -> None:
    Path(path).write_text(dumps(obj))


def write_csv(path: Path, header, rows, comments=()) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    Path(path).write_text(buf.getvalue())


VERDICT_COLUMNS = ["index", "variant", "status", "lhs_estimate", "lhs_se", "rhs_estimate", "rhs_se",
                   "margin", "z_margin", "flagged_singular_fraction", "gates_passed", "estimator"]


def verdict_row(i, v):
    est = v.estimator.get("mode", "")
    return [i, v.variant, v.status, v.lhs, v.lhs_se, v.rhs, v.rhs_se, v.margin, v.z_margin,
            float(v.flagged_singular_fraction), v.gates_passed, est]


def summarize(verdicts, gates):
    counts = {"PASS": 0, "FAIL": 0, "INCONCLUSIVE": 0}
    for v in verdicts:
        counts[v.status] += 1
    finite = [v.z_margin for v in verdicts if math.isfinite(v.z_margin)]
    gate_names = sorted({n for v in verdicts for n, _ in v.gates} | {n for n, _ in gates})
    violations = sorted({n for v in verdicts for n, ok in v.gates if not ok} | {n for n, ok in gates if not ok})
    return {
        "counts": counts,
        "total": len(verdicts),
        "worst_z_margin": min(finite) if finite else None,
        "singular_flag_total": float(sum(v.flagged_singular_fraction for v in verdicts)),
        "gates": gate_names,
        "gate_violations": violations,
    }


def envelope(command: str, config: dict, body: dict) -> dict:
    out = {"toolkit": TOOLKIT, "version": __version__, "command": command, "config": config}
    out.update(body)
    return out
