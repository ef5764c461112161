"""Deterministic text artefacts: trajectory CSV, JSON, atomic writes."""

from __future__ import annotations

import io
import json
import math
import os
import tempfile


def fmt(x) -> str:
    """Shortest round-trip representation of a float."""
    return repr(float(x))


def trajectory_csv(space, traj) -> str:
    """Columns t, x, u1..uk; one row per (time step, active node)."""
    buf = io.StringIO()
    k = space.components
    buf.write(",".join(["t", "x"] + [f"u{i + 1}" for i in range(k)]) + "\n")
    x = space.active_coordinates
    for t, state in zip(traj.grid.times, traj.states):
        parts = space.split(state)
        for j in range(space.n_active):
            buf.write(",".join([fmt(t), fmt(x[j])] + [fmt(parts[i, j]) for i in range(k)]) + "\n")
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_json(data) -> str:
    return json.dumps(_clean(data), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
