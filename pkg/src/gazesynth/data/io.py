"""Recording and velocity CSV files.

Recording CSV: header-driven, columns ``n_ms,x_deg,y_deg[,xT_deg,yT_deg][,valid]``.
Empty position cells load as NaN and mark the row invalid.  Subject, task
and sample rate live in a JSON sidecar ``<name>.meta.json`` (or are passed
explicitly).
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..signal import GazeRecording, VelocitySequence

DEFAULT_SCHEMA = {
    "n_ms": "n_ms",
    "x_deg": "x_deg",
    "y_deg": "y_deg",
    "xT_deg": "xT_deg",
    "yT_deg": "yT_deg",
    "valid": "valid",
}
REQUIRED = ("n_ms", "x_deg", "y_deg")


class RecordingFormatError(ValueError):
    pass


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


def write_recording_csv(rec: GazeRecording, path, sidecar: bool = True) -> None:
    path = Path(path)
    cols = ["n_ms", "x_deg", "y_deg"]
    data = [rec.t_ms, rec.x_deg, rec.y_deg]
    if rec.has_target:
        cols += ["xT_deg", "yT_deg"]
        data += [rec.target_x_deg, rec.target_y_deg]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols + ["valid"])
        for i in range(rec.n_samples):
            w.writerow([_fmt(a[i]) for a in data] + [int(rec.valid[i])])
    if sidecar:
        meta = {"subject_id": rec.subject_id, "task_label": rec.task_label,
                "sample_rate_hz": rec.sample_rate_hz}
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _parse(cell: str) -> float:
    cell = cell.strip()
    return float(cell) if cell else np.nan


def load_recording_csv(path, schema: dict[str, str] | None = None, subject_id: str | None = None,
                       task_label: str | None = None,
                       sample_rate_hz: float | None = None) -> GazeRecording:
    """Load a recording; explicit arguments override the sidecar metadata."""
    path = Path(path)
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise RecordingFormatError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    col = {name: header.index(schema[name]) for name in schema if schema[name] in header}
    for name in REQUIRED:
        if name not in col:
            raise RecordingFormatError(f"{path}: missing required column {schema[name]!r}")
    if not rows:
        raise RecordingFormatError(f"{path}: no data rows")

    def column(name):
        return np.array([_parse(r[col[name]]) for r in rows])

    t = column("n_ms")
    if np.any(~np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise RecordingFormatError(f"{path}: timestamps must be finite and strictly increasing")
    x, y = column("x_deg"), column("y_deg")
    valid = np.isfinite(x) & np.isfinite(y)
    if "valid" in col:
        valid &= np.array([r[col["valid"]].strip() not in ("0", "false", "False", "") for r in rows])
    tx = column("xT_deg") if "xT_deg" in col else None
    ty = column("yT_deg") if "yT_deg" in col else None
    if (tx is None) != (ty is None):
        raise RecordingFormatError(f"{path}: target columns must come in pairs")

    meta = {}
    if sidecar_path(path).exists():
        meta = json.loads(sidecar_path(path).read_text())
    rate = sample_rate_hz or meta.get("sample_rate_hz")
    if rate is None:
        rate = 1000.0 / float(np.median(np.diff(t))) if len(t) > 1 else 1000.0
    return GazeRecording(
        subject_id=subject_id if subject_id is not None else meta.get("subject_id", path.stem),
        task_label=task_label if task_label is not None else meta.get("task_label", ""),
        t_ms=t, x_deg=x, y_deg=y, sample_rate_hz=float(rate),
        target_x_deg=tx, target_y_deg=ty, valid=valid,
    )


def list_recordings(directory) -> list[Path]:
    return sorted(p for p in Path(directory).glob("*.csv") if not p.name.endswith(".vel.csv"))


def write_velocity_csv(path, t_ms: np.ndarray, v: VelocitySequence, v0: VelocitySequence,
                       meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_ms", "vx_dps", "vy_dps", "v0x_dps", "v0y_dps"])
        for i in range(len(v)):
            w.writerow([repr(float(t_ms[i])), repr(float(v.vx[i])), repr(float(v.vy[i])),
                        repr(float(v0.vx[i])), repr(float(v0.vy[i]))])
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_velocity_csv(path) -> tuple[np.ndarray, VelocitySequence, VelocitySequence, dict]:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(sidecar_path(path).read_text())
    rate = meta["sample_rate_hz"]
    return (arr[:, 0], VelocitySequence(rate, arr[:, 1], arr[:, 2]),
            VelocitySequence(rate, arr[:, 3], arr[:, 4]), meta)
