"""Serialization: trajectory CSV, SVG projections, JSON records, sweep CSV.

All text files are UTF-8 with LF line endings.  Floats in CSV files use 17
significant digits, which is enough to read every double back bit-exactly.
"""
from __future__ import annotations

import csv
import json
import math
import os
from typing import Optional

import numpy as np

from .dynamics import FixedPoint, State, SystemParams
from .integrator import Trajectory
from .sweep import SweepResult
from .topology import TopologyReport

__all__ = [
    "TRAJECTORY_HEADER",
    "SWEEP_HEADER",
    "AXES",
    "export_trajectory_csv",
    "read_trajectory_csv",
    "export_projection_svg",
    "report_record",
    "fixed_point_record",
    "write_json",
    "read_json",
    "export_sweep_csv",
    "read_sweep_csv",
]

TRAJECTORY_HEADER = ("t", "X", "Y", "Z")
SWEEP_HEADER = ("C", "ratio", "ic_index", "verdict", "winding", "recurrence")
AXES = {"X": 0, "Y": 1, "Z": 2}


def _g(x: float) -> str:
    return "%.17g" % x


def _open_out(path):
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(path)!r}: {exc.strerror or exc}") from exc


def export_trajectory_csv(traj: Trajectory, path) -> str:
    """Write ``t,X,Y,Z`` with one row per sample."""
    if len(traj) == 0:
        raise ValueError("cannot export an empty trajectory")
    data = np.column_stack([traj.t, traj.y])
    lines = [",".join(TRAJECTORY_HEADER)]
    lines += [",".join(_g(v) for v in row) for row in data.tolist()]
    with _open_out(path) as fh:
        fh.write("\n".join(lines) + "\n")
    return os.fspath(path)


def read_trajectory_csv(path, params: Optional[SystemParams] = None) -> Trajectory:
    """Inverse of :func:`export_trajectory_csv`."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            header = fh.readline().strip()
            if tuple(header.split(",")) != TRAJECTORY_HEADER:
                raise ValueError(f"{os.fspath(path)!r}: expected header {','.join(TRAJECTORY_HEADER)!r}, got {header!r}")
            data = np.loadtxt(fh, delimiter=",", dtype=float, ndmin=2)
    except OSError as exc:
        raise OSError(f"cannot read {os.fspath(path)!r}: {exc.strerror or exc}") from exc
    if data.size == 0:
        raise ValueError(f"{os.fspath(path)!r} holds no samples")
    return Trajectory.from_samples(data[:, 0], data[:, 1:4], params)


def _axis_pair(axes) -> tuple[int, int]:
    if isinstance(axes, str):
        axes = tuple(axes.replace(",", ""))
    try:
        a, b = axes
    except (TypeError, ValueError):
        raise ValueError(f"projection needs exactly two axes, got {axes!r}") from None
    a, b = str(a).upper(), str(b).upper()
    if a not in AXES or b not in AXES:
        raise ValueError(f"projection axes must be among X, Y, Z, got {axes!r}")
    if a == b:
        raise ValueError(f"projection axes must differ, got {a}{b}")
    return AXES[a], AXES[b]


def export_projection_svg(
    traj: Trajectory,
    path,
    axes=("X", "Z"),
    size: int = 600,
    max_points: int = 20000,
    stroke: str = "#1f4e79",
    title: Optional[str] = None,
) -> str:
    """Standalone SVG 1.1 with one polyline of the chosen 2D projection.

    Long trajectories are thinned to ``max_points`` evenly spaced samples
    (the last sample is always kept).  The vertical axis points up.
    """
    i, j = _axis_pair(axes)
    if len(traj) == 0:
        raise ValueError("cannot plot an empty trajectory")
    pts = traj.y[:, [i, j]]
    if len(pts) > max_points:
        idx = np.unique(np.r_[np.linspace(0, len(pts) - 1, max_points).round().astype(int), len(pts) - 1])
        pts = pts[idx]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    pad = 0.05 * span
    x = pts[:, 0]
    y = -pts[:, 1]  # flip so that larger values are drawn higher
    vb = (lo[0] - pad, -hi[1] - pad, (hi[0] - lo[0]) + 2 * pad, (hi[1] - lo[1]) + 2 * pad)
    width = max(vb[2], 1e-12)
    height = max(vb[3], 1e-12)
    sw = span / 600.0
    names = "XYZ"
    coords = " ".join("%.7g,%.7g" % (a, b) for a, b in zip(x.tolist(), y.tolist()))
    doc = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{size}" height="{size}" viewBox="{vb[0]:.7g} {vb[1]:.7g} {width:.7g} {height:.7g}" '
        'preserveAspectRatio="xMidYMid meet">',
        f"<title>{title or f'{names[i]}-{names[j]} projection'}</title>",
        f'<polyline fill="none" stroke="{stroke}" stroke-width="{sw:.4g}" '
        f'stroke-linejoin="round" points="{coords}"/>',
        "</svg>",
    ]
    with _open_out(path) as fh:
        fh.write("\n".join(doc) + "\n")
    return os.fspath(path)


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, complex):
        return {"re": _clean(x.real), "im": _clean(x.imag)}
    return x


def report_record(report: TopologyReport, params: Optional[SystemParams] = None, ic: Optional[State] = None) -> dict:
    rec = {}
    if params is not None:
        rec["params"] = {"A": params.A, "B": params.B, "C": params.C}
    if ic is not None:
        rec["ic"] = list(ic.xyz)
    rec.update(report.as_dict())
    return _clean(rec)


def fixed_point_record(fp: FixedPoint) -> dict:
    return _clean({
        "state": list(fp.state.xyz),
        "eigenvalues": list(fp.eigenvalues),
        "classification": fp.classification.value,
        "note": fp.note,
    })


def write_json(obj, path) -> str:
    with _open_out(path) as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")
    return os.fspath(path)


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {os.fspath(path)!r}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{os.fspath(path)!r} is not valid JSON: {exc}") from exc


def export_sweep_csv(result: SweepResult, path) -> str:
    """One row per (cell, IC) in row-major cell order."""
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for cell in result.cells:
            for run in cell.runs:
                w.writerow([
                    _g(cell.C),
                    _g(cell.ratio),
                    run.ic_index,
                    run.verdict.value,
                    "" if run.winding is None else run.winding,
                    "" if run.recurrence is None else _g(run.recurrence),
                ])
    return os.fspath(path)


def read_sweep_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({
            "C": float(r["C"]),
            "ratio": float(r["ratio"]),
            "ic_index": int(r["ic_index"]),
            "verdict": r["verdict"],
            "winding": int(r["winding"]) if r["winding"] else None,
            "recurrence": float(r["recurrence"]) if r["recurrence"] else None,
        })
    return out
