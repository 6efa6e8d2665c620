"""Signal-quality metrics: spatial accuracy and precision over stable fixation bins,
two-stage user/error (U|E) percentiles, and embedding similarity between real and
synthetic recordings."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .conditioning import ReferenceEncoder, cosine_similarity
from .events import StableBin, extract_stable_bins, idt_segment, EventKind
from .signal import GazeRecording, decimate_velocity, sanitize, sgdf_differentiate

DEFAULT_CELLS = ((50.0, 50.0), (95.0, 95.0))
METRICS = ("accuracy_dva", "precision_rms_dva")


class MissingTargetError(ValueError):
    pass


@dataclass(frozen=True)
class BinError:
    subject_id: str
    task_label: str
    start_index: int
    accuracy_dva: float | None
    precision_rms_dva: float

    def __post_init__(self):
        for v in (self.accuracy_dva, self.precision_rms_dva):
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"bin errors must be finite and non-negative, got {v}")


# --- per-bin metrics ------------------------------------------------------------------

def _bin_arrays(b):
    if isinstance(b, StableBin):
        return b.gaze, b.target
    gaze, target = b
    return np.asarray(gaze, dtype=np.float64), None if target is None else np.asarray(target, dtype=np.float64)


def spatial_accuracy(b) -> float:
    """Distance between the bin's mean gaze point and mean target point (planar, dva).

    ``b`` is a ``StableBin`` or a ``(gaze, target)`` pair of ``(2, n)`` arrays.
    """
    gaze, target = _bin_arrays(b)
    if target is None:
        raise MissingTargetError("task has no target signal")
    g = np.nanmean(gaze, axis=1)
    t = np.nanmean(target, axis=1)
    return float(np.hypot(*(g - t)))


def spatial_precision(b, method: str = "s2s") -> float:
    """RMS of successive-sample displacement (``"s2s"``) or of the distance to the
    bin centroid (``"centroid"``)."""
    gaze, _ = _bin_arrays(b)
    if gaze.shape[1] < 2:
        raise ValueError("spatial precision needs at least 2 samples")
    if method == "s2s":
        d = np.diff(gaze, axis=1)
        return float(np.sqrt(np.nanmean(np.sum(d ** 2, axis=0))))
    if method == "centroid":
        c = gaze - np.nanmean(gaze, axis=1, keepdims=True)
        return float(np.sqrt(np.nanmean(np.sum(c ** 2, axis=0))))
    raise ValueError(f"unknown precision method {method!r}")


# --- U|E aggregation --------------------------------------------------------------------

def _percentile_linear(values: np.ndarray, p: float) -> float:
    """Linear interpolation between closest order statistics, written out explicitly.

    ``np.percentile`` switches to a different lerp form above the midpoint,
    which differs from the textbook formula in the last bit; this keeps
    reported cells reproducible by hand.
    """
    xs = np.sort(values)
    h = (len(xs) - 1) * p / 100.0
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return float(xs[lo] + (h - lo) * (xs[hi] - xs[lo]))


def ue_percentile(errors: dict[str, list[float]], U: float, E: float) -> float:
    """Per-subject E-th percentile of bin errors, then the U-th percentile across subjects.

    Both stages interpolate linearly between the closest order statistics.
    """
    if not errors:
        raise ValueError("no subjects to aggregate")
    if not (0 <= U <= 100 and 0 <= E <= 100):
        raise ValueError("percentiles must lie in [0, 100]")
    per_user = []
    for sid in sorted(errors):
        vals = np.asarray(errors[sid], dtype=np.float64)
        if vals.size == 0:
            raise ValueError(f"subject {sid!r} has no error values")
        per_user.append(_percentile_linear(vals, E))
    return _percentile_linear(np.array(per_user), U)


def cell_name(U: float, E: float) -> str:
    return f"U{U:g}|E{E:g}"


# --- similarity --------------------------------------------------------------------------

def recording_velocity(rec: GazeRecording, rate_hz: float) -> np.ndarray:
    """SGDF velocity, sanitized and brought to ``rate_hz`` by anti-aliased decimation."""
    v = sanitize(sgdf_differentiate(rec))
    if rec.sample_rate_hz != rate_hz:
        v = decimate_velocity(v, rate_hz)
    return v.data


def similarity_report(real_recs: list[GazeRecording], synth_recs: list[GazeRecording],
                      encoder: ReferenceEncoder | None = None, rate_hz: float = 100.0):
    """Mean cosine similarity of encoder embeddings per task over (subject, task) pairs.

    Both velocities are computed at their own rate, decimated to ``rate_hz``
    and cropped to the shorter length before encoding.  Returns
    ``({task: mean cosine}, [(subject, task, cosine), ...])``.
    """
    encoder = encoder or ReferenceEncoder()

    def key_map(recs, side):
        out = {}
        for r in recs:
            k = (r.subject_id, r.task_label)
            if k in out:
                raise ValueError(f"duplicate {side} recording for subject {k[0]!r}, task {k[1]!r}")
            out[k] = r
        return out

    real, synth = key_map(real_recs, "real"), key_map(synth_recs, "synthetic")
    unpaired = sorted(set(real) ^ set(synth))
    if unpaired:
        listed = ", ".join(f"{s}/{t}" for s, t in unpaired)
        raise ValueError(f"unpaired recordings: {listed}")
    pairs = []
    for k in sorted(real):
        a = recording_velocity(real[k], rate_hz)
        b = recording_velocity(synth[k], rate_hz)
        n = min(a.shape[1], b.shape[1])
        cos = cosine_similarity(encoder.encode_array(a[:, :n], rate_hz)[0],
                                encoder.encode_array(b[:, :n], rate_hz)[0])
        pairs.append((k[0], k[1], float(cos)))
    tasks = sorted({t for _, t, _ in pairs})
    per_task = {t: float(np.mean([c for _, tt, c in pairs if tt == t])) for t in tasks}
    return per_task, pairs


# --- report ------------------------------------------------------------------------------

@dataclass
class EventsConfig:
    dispersion_deg: float = 1.0
    min_fix_ms: float = 100.0
    bin_ms: float = 80.0


@dataclass
class MetricsConfig:
    cells: tuple = DEFAULT_CELLS
    precision_method: str = "s2s"


@dataclass
class QualityReport:
    """``tables[task][metric][cell]`` -> value (``None`` when no bin supports it)."""

    model_label: str
    tables: dict = field(default_factory=dict)
    n_bins: dict = field(default_factory=dict)
    n_subjects: dict = field(default_factory=dict)
    similarity: dict = field(default_factory=dict)
    precision_method: str = "s2s"

    def to_dict(self) -> dict:
        return {
            "model_label": self.model_label,
            "precision_method": self.precision_method,
            "tables": self.tables,
            "n_bins": self.n_bins,
            "n_subjects": self.n_subjects,
            "similarity": self.similarity,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "QualityReport":
        validate_report(d)
        return cls(d["model_label"], d["tables"], d["n_bins"], d["n_subjects"], d["similarity"],
                   d["precision_method"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "task", "metric", "cell", "value"])
        for task in sorted(self.tables):
            for metric in sorted(self.tables[task]):
                for cell, val in self.tables[task][metric].items():
                    w.writerow([self.model_label, task, metric, cell, "" if val is None else repr(val)])
        for task in sorted(self.similarity):
            w.writerow([self.model_label, task, "cosine_similarity", "mean",
                        repr(self.similarity[task])])
        return buf.getvalue()

    def to_svg(self) -> str:
        """Bar plots of the U|E cells, one panel per metric (byte-stable output)."""
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        tasks = sorted(self.tables)
        cells = sorted({c for t in tasks for m in self.tables[t].values() for c in m})
        with matplotlib.rc_context({"svg.hashsalt": "gazesynth", "svg.fonttype": "none"}):
            fig, axes = plt.subplots(1, len(METRICS), figsize=(4 * len(METRICS), 3))
            for ax, metric in zip(np.atleast_1d(axes), METRICS):
                width = 0.8 / max(len(cells), 1)
                for j, cell in enumerate(cells):
                    vals = [self.tables[t].get(metric, {}).get(cell) for t in tasks]
                    vals = [np.nan if v is None else v for v in vals]
                    ax.bar(np.arange(len(tasks)) + j * width, vals, width, label=cell)
                ax.set_xticks(np.arange(len(tasks)) + 0.4 - width / 2)
                ax.set_xticklabels(tasks)
                ax.set_title(f"{self.model_label}: {metric}")
                ax.set_ylabel("dva")
                ax.legend(fontsize="small")
            fig.tight_layout()
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None})
            plt.close(fig)
        return buf.getvalue()


REPORT_SCHEMA = {
    "type": "object",
    "required": ["model_label", "precision_method", "tables", "n_bins", "n_subjects", "similarity"],
    "properties": {
        "model_label": {"type": "string"},
        "precision_method": {"enum": ["s2s", "centroid"]},
        "tables": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "propertyNames": {"enum": list(METRICS)},
                "additionalProperties": {
                    "type": "object",
                    "propertyNames": {"pattern": r"^U[0-9.]+\|E[0-9.]+$"},
                    "additionalProperties": {
                        "anyOf": [{"type": "number", "minimum": 0}, {"type": "null"}]},
                },
            },
        },
        "n_bins": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
        "n_subjects": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
        "similarity": {"type": "object",
                       "additionalProperties": {"type": "number", "minimum": -1, "maximum": 1}},
    },
    "additionalProperties": False,
}


def validate_report(d: dict) -> None:
    """Schema check plus monotonicity in E for each fixed U."""
    import jsonschema
    jsonschema.validate(d, REPORT_SCHEMA)
    for task, metrics in d["tables"].items():
        for metric, cells in metrics.items():
            parsed = []
            for name, val in cells.items():
                u, e = name[1:].split("|E")
                parsed.append((float(u), float(e), val))
            for u1, e1, v1 in parsed:
                for u2, e2, v2 in parsed:
                    if u1 == u2 and e1 < e2 and v1 is not None and v2 is not None and v1 > v2 + 1e-12:
                        raise ValueError(f"{task}/{metric}: U{u1:g} not monotone in E")


def bin_errors(rec: GazeRecording, events: EventsConfig, precision_method: str = "s2s") -> list[BinError]:
    """Segment one recording and score every stable bin."""
    segs = idt_segment(rec, events.dispersion_deg, events.min_fix_ms)
    fix = [s for s in segs if s.kind is EventKind.FIXATION]
    out = []
    for b in extract_stable_bins(fix, rec, events.bin_ms):
        if not np.all(np.isfinite(b.gaze)):
            continue
        acc = spatial_accuracy(b) if rec.has_target else None
        out.append(BinError(rec.subject_id, rec.task_label, b.start_index, acc,
                            spatial_precision(b, precision_method)))
    return out


def build_report(recordings: list[GazeRecording], events: EventsConfig | None = None,
                 metrics: MetricsConfig | None = None, model_label: str = "model",
                 similarity: dict | None = None) -> QualityReport:
    """Bin, score and aggregate per task.  Accuracy is left out for tasks without targets."""
    events = events or EventsConfig()
    metrics = metrics or MetricsConfig()
    by_task: dict[str, list[BinError]] = {}
    subjects: dict[str, set] = {}
    for rec in recordings:
        by_task.setdefault(rec.task_label, []).extend(bin_errors(rec, events, metrics.precision_method))
        subjects.setdefault(rec.task_label, set()).add(rec.subject_id)
    report = QualityReport(model_label, precision_method=metrics.precision_method,
                           similarity=dict(similarity or {}))
    for task in sorted(by_task):
        bins = by_task[task]
        table = {}
        for metric in METRICS:
            errs: dict[str, list[float]] = {}
            for b in bins:
                v = getattr(b, metric)
                if v is not None:
                    errs.setdefault(b.subject_id, []).append(v)
            has_target = any(r.has_target for r in recordings if r.task_label == task)
            if metric == "accuracy_dva" and not has_target:
                continue
            table[metric] = {cell_name(u, e): (ue_percentile(errs, u, e) if errs else None)
                             for u, e in metrics.cells}
        report.tables[task] = table
        report.n_bins[task] = len(bins)
        report.n_subjects[task] = len(subjects[task])
    validate_report(report.to_dict())
    return report
