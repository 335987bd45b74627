"""Report serialization: deterministic JSON, CSV, atomic writes, schemas."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

__all__ = [
    "to_jsonable", "dumps", "write_atomic", "trajectory_json", "trajectory_csv",
    "criterion_csv", "certificate_csv", "SCHEMAS",
]


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(obj.value, str):  # str enums
        return obj.value
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path, text):
    """Write via a temp file in the same directory, then rename."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if isinstance(x, float) and not math.isfinite(x) else
                    (repr(x) if isinstance(x, float) else x) for x in r])
    return buf.getvalue()


def trajectory_json(traj, extra=None):
    d = {
        "kind": "trajectory",
        "t0": traj.t0,
        "tau": traj.tau,
        "horizon": traj.horizon,
        "t": traj.t,
        "y": traj.y,
        "impulse_times": list(traj.impulse_times),
        "post_jump": [{"t": s, "y_post": v} for s, v in sorted(traj.post_jump.items())],
        "info": traj.info,
    }
    if extra:
        d.update(extra)
    return dumps(d)


def trajectory_csv(traj):
    right = traj.right_values()
    imp = traj.is_impulse
    rows = ((float(t), float(y), int(i), float(r))
            for t, y, i, r in zip(traj.t, traj.y, imp, right))
    return _csv(["t", "y", "is_impulse", "y_post"], rows)


def criterion_csv(report):
    return _csv(["t", "F", "error"],
                ((float(t), float(f), float(e)) for t, f, e in
                 zip(report.t, report.F, report.errors)))


def certificate_csv(cert):
    """One row per master-grid node; ``u_k`` blank outside its domain."""
    n = cert.grid.size
    cols = []
    for s, u in zip(cert.starts, cert.iterates):
        c = np.full(n, math.nan)
        c[s:] = u
        cols.append(c)
    header = ["t"] + [f"u_{k + 1}" for k in range(len(cols))]
    rows = ([float(cert.grid[i])] + [float(c[i]) for c in cols] for i in range(n))
    return _csv(header, rows)


_NUMBER = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

SCHEMAS = {
    "trajectory": {
        "type": "object",
        "required": ["kind", "t0", "tau", "horizon", "t", "y", "impulse_times", "post_jump", "info"],
        "properties": {
            "kind": {"const": "trajectory"},
            "t0": _NUMBER, "tau": _NUMBER, "horizon": _NUMBER,
            "t": {"type": "array", "items": _NUMBER},
            "y": {"type": "array", "items": _NUMBER},
            "impulse_times": {"type": "array", "items": _NUMBER},
            "post_jump": {"type": "array", "items": {
                "type": "object", "required": ["t", "y_post"],
                "properties": {"t": _NUMBER, "y_post": _NUMBER}}},
            "info": {"type": "object"},
            "residual": _NUM_OR_NULL,
            "classification": {"type": "string"},
        },
    },
    "criterion": {
        "type": "object",
        "required": ["kind", "verdict", "conclusion", "threshold", "sup_observed", "margin",
                     "T", "horizon", "stride", "caveat", "window_values"],
        "properties": {
            "kind": {"enum": ["oscillation", "nonoscillation"]},
            "verdict": {"enum": ["SatisfiedOnHorizon", "NotSatisfiedOnHorizon", "Boundary"]},
            "conclusion": {"enum": ["Oscillatory", "NonoscillatoryCertified", "Inconclusive"]},
            "threshold": _NUMBER, "sup_observed": _NUMBER, "argsup": _NUMBER,
            "margin": _NUMBER, "T": _NUMBER, "horizon": _NUMBER, "stride": _NUMBER,
            "caveat": {"type": "string"},
            "window_values": {"type": "array", "items": {
                "type": "object", "required": ["t", "F", "error"],
                "properties": {"t": _NUMBER, "F": _NUMBER, "error": _NUMBER}}},
        },
    },
    "certificate": {
        "type": "object",
        "required": ["kind", "status", "converged", "conclusion", "iterations", "sup_gap",
                     "residual", "tol", "monotone", "below_eP", "valid_from", "horizon",
                     "gaps", "grid", "iterates"],
        "properties": {
            "kind": {"const": "certificate"},
            "status": {"enum": ["converged", "diverged", "exhausted", "max_iterations"]},
            "converged": {"type": "boolean"},
            "conclusion": {"enum": ["NonoscillatoryCertified", "Inconclusive"]},
            "iterations": {"type": "integer", "minimum": 1},
            "sup_gap": _NUM_OR_NULL, "residual": _NUM_OR_NULL, "tol": _NUMBER,
            "monotone": {"type": "boolean"}, "below_eP": {"type": "boolean"},
            "valid_from": _NUMBER, "horizon": _NUMBER,
            "gaps": {"type": "array", "items": _NUMBER},
            "grid": {"type": "object", "required": ["start", "step", "count"]},
            "iterates": {"type": "array", "items": {
                "type": "object", "required": ["start_index", "values"],
                "properties": {"start_index": {"type": "integer"},
                               "values": {"type": "array", "items": _NUM_OR_NULL}}}},
        },
    },
    "quad": {
        "type": "object",
        "required": ["kind", "a", "b", "value", "error_estimate", "panels_used", "converged"],
        "properties": {
            "kind": {"const": "quad"},
            "a": _NUMBER, "b": _NUMBER, "value": _NUMBER,
            "error_estimate": _NUMBER, "panels_used": {"type": "integer", "minimum": 1},
            "converged": {"type": "boolean"},
        },
    },
}
