"""Fixation/saccade segmentation (I-DT), stable 80 ms bins, scanpath assembly."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .signal import GazeRecording, VelocitySequence, sgdf_differentiate

DEFAULT_DISPERSION_DEG = 1.0
DEFAULT_MIN_FIX_MS = 100.0


class EventKind(enum.Enum):
    FIXATION = "fixation"
    SACCADE = "saccade"


@dataclass(frozen=True, eq=False)
class EventSegment:
    kind: EventKind
    start_index: int
    end_index: int  # exclusive
    velocity: VelocitySequence
    start_pos: tuple[float, float]
    end_pos: tuple[float, float]
    subject_id: str = ""

    def __post_init__(self):
        if self.end_index <= self.start_index:
            raise ValueError("segment must span at least one sample")

    @property
    def n_samples(self) -> int:
        return self.end_index - self.start_index


@dataclass(frozen=True, eq=False)
class StableBin:
    fixation: EventSegment
    start_index: int
    length_samples: int
    gaze: np.ndarray  # (2, n)
    target: np.ndarray | None  # (2, n)


def samples_for_ms(ms: float, rate_hz: float) -> int:
    return int(round(ms * rate_hz / 1000.0))


def _dispersion_runs(x: np.ndarray, y: np.ndarray, start: int, end: int):
    xs, ys = x[start:end], y[start:end]
    return np.max(xs), np.min(xs), np.max(ys), np.min(ys)


def idt_labels(x: np.ndarray, y: np.ndarray, dispersion_threshold_deg: float,
               min_len: int) -> list[tuple[int, int]]:
    """Fixation spans ``[start, end)`` found by classic I-DT.

    A window of ``min_len`` samples whose dispersion (x range + y range) is
    within the threshold seeds a fixation, which then grows one sample at a
    time until the dispersion would exceed the threshold.  Otherwise the
    window start advances by one sample.  Windows touching a NaN never qualify.
    """
    n = len(x)
    spans = []
    if n < min_len or min_len < 1:
        return spans
    win_x = np.lib.stride_tricks.sliding_window_view(x, min_len)
    win_y = np.lib.stride_tricks.sliding_window_view(y, min_len)
    # NaNs propagate through max/min so the comparison below is False for them
    seed_disp = (win_x.max(1) - win_x.min(1)) + (win_y.max(1) - win_y.min(1))
    seed_ok = seed_disp <= dispersion_threshold_deg
    i = 0
    while i <= n - min_len:
        if not seed_ok[i]:
            i += 1
            continue
        j = i + min_len
        xmax, xmin, ymax, ymin = _dispersion_runs(x, y, i, j)
        while j < n:
            xj, yj = x[j], y[j]
            if not (np.isfinite(xj) and np.isfinite(yj)):
                break
            nxmax, nxmin = max(xmax, xj), min(xmin, xj)
            nymax, nymin = max(ymax, yj), min(ymin, yj)
            if not (nxmax - nxmin) + (nymax - nymin) <= dispersion_threshold_deg:
                break
            xmax, xmin, ymax, ymin = nxmax, nxmin, nymax, nymin
            j += 1
        spans.append((i, j))
        i = j
    return spans


def idt_segment(p: GazeRecording, dispersion_threshold_deg: float = DEFAULT_DISPERSION_DEG,
                min_fix_duration_ms: float = DEFAULT_MIN_FIX_MS,
                velocity: VelocitySequence | None = None) -> list[EventSegment]:
    """Split a recording into alternating fixation and saccade segments.

    Everything outside a detected fixation becomes a saccade segment, so the
    output tiles ``[0, S)`` in order.  ``velocity`` defaults to the SGDF
    velocity of ``p`` (finite differences for recordings shorter than 7).
    """
    if dispersion_threshold_deg <= 0 or min_fix_duration_ms <= 0:
        raise ValueError("I-DT thresholds must be positive")
    n = p.n_samples
    if n == 0:
        return []
    if velocity is None:
        if n >= 7:
            velocity = sgdf_differentiate(p)
        elif n >= 2:
            g = np.gradient(p.positions, axis=1) * p.sample_rate_hz
            velocity = VelocitySequence(p.sample_rate_hz, g[0], g[1])
        else:
            velocity = VelocitySequence(p.sample_rate_hz, [0.0], [0.0])
    x = np.where(p.valid, p.x_deg, np.nan)
    y = np.where(p.valid, p.y_deg, np.nan)
    min_len = max(1, samples_for_ms(min_fix_duration_ms, p.sample_rate_hz))
    fixations = idt_labels(x, y, dispersion_threshold_deg, min_len)

    def make(kind, a, b):
        return EventSegment(kind, a, b, velocity.slice(a, b),
                            (float(p.x_deg[a]), float(p.y_deg[a])),
                            (float(p.x_deg[b - 1]), float(p.y_deg[b - 1])), p.subject_id)

    segments = []
    cursor = 0
    for a, b in fixations:
        if a > cursor:
            segments.append(make(EventKind.SACCADE, cursor, a))
        segments.append(make(EventKind.FIXATION, a, b))
        cursor = b
    if cursor < n:
        segments.append(make(EventKind.SACCADE, cursor, n))
    return segments


def extract_stable_bins(fixations: list[EventSegment], rec: GazeRecording,
                        bin_ms: float = 80.0) -> list[StableBin]:
    """Left-aligned, non-overlapping ``bin_ms`` bins inside each fixation."""
    size = samples_for_ms(bin_ms, rec.sample_rate_hz)
    if size < 1:
        raise ValueError(f"bin of {bin_ms} ms is shorter than one sample at {rec.sample_rate_hz} Hz")
    gaze = rec.positions
    target = rec.targets
    bins = []
    for seg in fixations:
        if seg.kind is not EventKind.FIXATION:
            raise ValueError("stable bins are only defined over fixation segments")
        for k in range(seg.n_samples // size):
            a = seg.start_index + k * size
            bins.append(StableBin(seg, a, size, gaze[:, a:a + size],
                                  None if target is None else target[:, a:a + size]))
    return bins


def assemble_scanpath(fixations: list[VelocitySequence], saccades: list[VelocitySequence],
                      n_fixations: int, start_pos=(0.0, 0.0), subject_id: str = "",
                      task_label: str = "synthetic") -> GazeRecording:
    """Interleave fixation and saccade velocities and integrate to positions.

    ``pos[k+1] = pos[k] + v[k] / rate`` (left Riemann sum), so first
    differences of the output reproduce the input velocities.
    """
    if n_fixations < 1:
        raise ValueError("n_fixations must be at least 1")
    if len(fixations) < n_fixations or len(saccades) < n_fixations - 1:
        raise ValueError(
            f"need {n_fixations} fixations and {n_fixations - 1} saccades, got "
            f"{len(fixations)} and {len(saccades)}"
        )
    parts = []
    for i in range(n_fixations):
        parts.append(fixations[i])
        if i < n_fixations - 1:
            parts.append(saccades[i])
    rate = parts[0].sample_rate_hz
    if any(s.sample_rate_hz != rate for s in parts):
        raise ValueError("all segments must share one sample rate")
    v = np.concatenate([s.data for s in parts], axis=1)
    pos = np.empty_like(v)
    pos[:, 0] = start_pos
    pos[:, 1:] = np.asarray(start_pos, dtype=np.float64)[:, None] + np.cumsum(v[:, :-1], axis=1) / rate
    return GazeRecording.from_positions(pos[0], pos[1], rate, subject_id, task_label)
