"""Gaze position/velocity containers and the preprocessing chain.

Positions are in degrees of visual angle (dva), velocities in deg/s.  The
normalized velocity representation used by the generative models is the
sine map ``sin(clip(v, +-1000) * 0.09 deg)``, which lives in [-1, 1].
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import firwin, oaconvolve

VELOCITY_LIMIT = 1000.0
ANGLE_LIMIT = 90.0
RESCALE = ANGLE_LIMIT / VELOCITY_LIMIT  # 0.09

_T_TOL_MS = 1e-6


def _as_float_array(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class GazeRecording:
    """A monocular 2-D gaze recording with an optional target channel."""

    subject_id: str
    task_label: str
    t_ms: np.ndarray
    x_deg: np.ndarray
    y_deg: np.ndarray
    sample_rate_hz: float = 1000.0
    target_x_deg: np.ndarray | None = None
    target_y_deg: np.ndarray | None = None
    valid: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        t = _as_float_array(self.t_ms)
        x = _as_float_array(self.x_deg)
        y = _as_float_array(self.y_deg)
        n = len(t)
        if n < 1:
            raise ValueError("recording must contain at least one sample")
        if len(x) != n or len(y) != n:
            raise ValueError("t_ms, x_deg and y_deg must share one length")
        if n > 1:
            step = 1000.0 / self.sample_rate_hz
            if np.max(np.abs(np.diff(t) - step)) > _T_TOL_MS:
                raise ValueError(
                    f"timestamps must be evenly spaced at {step} ms for {self.sample_rate_hz} Hz"
                )
        has_tx = self.target_x_deg is not None
        if has_tx != (self.target_y_deg is not None):
            raise ValueError("target_x_deg and target_y_deg must be given together")
        if has_tx:
            tx = _as_float_array(self.target_x_deg)
            ty = _as_float_array(self.target_y_deg)
            if len(tx) != n or len(ty) != n:
                raise ValueError("target sequences must have the recording length")
            object.__setattr__(self, "target_x_deg", tx)
            object.__setattr__(self, "target_y_deg", ty)
        if self.valid is None:
            valid = np.isfinite(x) & np.isfinite(y)
        else:
            valid = np.asarray(self.valid, dtype=bool)
            if len(valid) != n:
                raise ValueError("valid mask must have the recording length")
            valid = valid & np.isfinite(x) & np.isfinite(y)
        object.__setattr__(self, "t_ms", t)
        object.__setattr__(self, "x_deg", x)
        object.__setattr__(self, "y_deg", y)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @classmethod
    def from_positions(cls, x, y, sample_rate_hz=1000.0, subject_id="", task_label="",
                       target_x=None, target_y=None, valid=None, t0_ms=0.0):
        n = len(x)
        t = t0_ms + np.arange(n) * (1000.0 / sample_rate_hz)
        return cls(subject_id, task_label, t, x, y, sample_rate_hz, target_x, target_y, valid)

    @property
    def n_samples(self) -> int:
        return len(self.t_ms)

    @property
    def has_target(self) -> bool:
        return self.target_x_deg is not None

    @property
    def positions(self) -> np.ndarray:
        """(2, S) array of x, y."""
        return np.stack([self.x_deg, self.y_deg])

    @property
    def targets(self) -> np.ndarray | None:
        if not self.has_target:
            return None
        return np.stack([self.target_x_deg, self.target_y_deg])

    def replace(self, **changes) -> "GazeRecording":
        return dataclasses.replace(self, **changes)

    def slice(self, start: int, stop: int) -> "GazeRecording":
        tx = self.target_x_deg[start:stop] if self.has_target else None
        ty = self.target_y_deg[start:stop] if self.has_target else None
        return GazeRecording(self.subject_id, self.task_label, self.t_ms[start:stop],
                             self.x_deg[start:stop], self.y_deg[start:stop], self.sample_rate_hz,
                             tx, ty, self.valid[start:stop])

    def equals(self, other: "GazeRecording") -> bool:
        """Field-exact equality (NaNs compare equal)."""
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b, equal_nan=a.dtype.kind == "f")
        return (
            self.subject_id == other.subject_id
            and self.task_label == other.task_label
            and self.sample_rate_hz == other.sample_rate_hz
            and same(self.t_ms, other.t_ms)
            and same(self.x_deg, other.x_deg)
            and same(self.y_deg, other.y_deg)
            and same(self.target_x_deg, other.target_x_deg)
            and same(self.target_y_deg, other.target_y_deg)
            and same(self.valid, other.valid)
        )


@dataclass(frozen=True, eq=False)
class VelocitySequence:
    """Two-channel velocity in deg/s."""

    sample_rate_hz: float
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        vx = _as_float_array(self.vx)
        vy = _as_float_array(self.vy)
        if vx.shape != vy.shape or vx.ndim != 1:
            raise ValueError("vx and vy must be 1-D sequences of equal length")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @classmethod
    def from_array(cls, data, sample_rate_hz):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] != 2:
            raise ValueError(f"expected a (2, S) array, got shape {data.shape}")
        return cls(sample_rate_hz, data[0], data[1])

    @property
    def data(self) -> np.ndarray:
        return np.stack([self.vx, self.vy])

    def __len__(self):
        return len(self.vx)

    def slice(self, start: int, stop: int):
        return type(self)(self.sample_rate_hz, self.vx[start:stop], self.vy[start:stop])


@dataclass(frozen=True, eq=False)
class NormalizedVelocitySequence(VelocitySequence):
    """Sine-normalized velocity; every sample lies in [-1, 1]."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(np.abs(self.vx) > 1.0) or np.any(np.abs(self.vy) > 1.0):
            raise ValueError("normalized velocity samples must lie in [-1, 1]")


# --- Savitzky-Golay differentiation -------------------------------------------------

def savgol_coefficients(window: int, polyorder: int, deriv: int = 1) -> np.ndarray:
    """Correlation weights giving the ``deriv``-th derivative at the window centre
    (per unit sample step) of the least-squares polynomial fit."""
    if window % 2 != 1 or window < 1:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if not 0 <= polyorder < window:
        raise ValueError("polyorder must satisfy 0 <= polyorder < window")
    if deriv > polyorder:
        return np.zeros(window)
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    design = np.vander(offsets, polyorder + 1, increasing=True)
    # row `deriv` of the pseudo-inverse maps samples to the fitted coefficient a_deriv
    coeffs = np.linalg.pinv(design)[deriv]
    return coeffs * float(np.prod(np.arange(1, deriv + 1)))


def _savgol_apply(x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    half = len(coeffs) // 2
    padded = np.pad(x, half, mode="reflect") if half else x
    windows = np.lib.stride_tricks.sliding_window_view(padded, len(coeffs))
    return windows @ coeffs


def sgdf_differentiate(p: GazeRecording, window: int = 7, polyorder: int = 2) -> VelocitySequence:
    """Savitzky-Golay first derivative of both position channels, in deg/s.

    Edges are mirror padded so the output keeps length S.  Invalid samples
    become NaN before filtering, so every output sample whose window touches a
    gap is NaN (to be zeroed by :func:`sanitize_and_normalize`).
    """
    if window % 2 != 1:
        raise ValueError(f"window must be odd, got {window}")
    if p.n_samples < window:
        raise ValueError(f"sequence too short: {p.n_samples} samples < window {window}")
    coeffs = savgol_coefficients(window, polyorder, deriv=1)
    out = []
    for axis in (p.x_deg, p.y_deg):
        a = np.where(p.valid, axis, np.nan)
        out.append(_savgol_apply(a, coeffs) * p.sample_rate_hz)
    return VelocitySequence(p.sample_rate_hz, out[0], out[1])


# --- resampling ---------------------------------------------------------------------

def _integer_factor(rate_in: float, rate_out: float) -> int:
    if not rate_out < rate_in:
        raise ValueError(
            f"target rate {rate_out} Hz must be below the sample rate {rate_in} Hz"
        )
    k = rate_in / rate_out
    if abs(k - round(k)) > 1e-9:
        raise ValueError(f"sample rate {rate_in} Hz is not an integer multiple of {rate_out} Hz")
    return int(round(k))


def antialias_kernel(factor: int, transition_hz: float | None = None,
                     sample_rate_hz: float = 1.0, attenuation_db: float = 120.0) -> np.ndarray:
    """Kaiser-windowed sinc low-pass with cutoff at the decimated Nyquist.

    ``transition_hz`` defaults to 40% of the decimated Nyquist frequency.
    """
    nyq_out = sample_rate_hz / (2.0 * factor)
    if transition_hz is None:
        transition_hz = 0.4 * nyq_out
    width = transition_hz / (sample_rate_hz / 2.0)
    # Kaiser design rule for the tap count at the requested attenuation
    ntaps = int(np.ceil((attenuation_db - 7.95) / (14.36 * width / 2.0))) + 1
    ntaps += 1 - ntaps % 2
    beta = 0.1102 * (attenuation_db - 8.7)
    return firwin(ntaps, nyq_out, window=("kaiser", beta), fs=sample_rate_hz)


def lowpass(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Zero-phase FIR filtering with odd-reflection padding at both ends."""
    half = len(kernel) // 2
    padded = np.pad(x, half, mode="reflect", reflect_type="odd")
    return oaconvolve(padded, kernel, mode="valid")


def decimate(x: np.ndarray, factor: int, sample_rate_hz: float = 1.0) -> np.ndarray:
    """Anti-aliased pick-every-``factor`` decimation (first sample kept)."""
    if factor == 1:
        return np.array(x, dtype=np.float64)
    kernel = antialias_kernel(factor, sample_rate_hz=sample_rate_hz)
    return lowpass(np.asarray(x, dtype=np.float64), kernel)[::factor]


def decimate_velocity(v: VelocitySequence, rate_hz: float) -> VelocitySequence:
    if rate_hz == v.sample_rate_hz:
        return v
    k = _integer_factor(v.sample_rate_hz, rate_hz)
    data = np.nan_to_num(v.data, nan=0.0, posinf=0.0, neginf=0.0)
    return VelocitySequence(rate_hz, decimate(data[0], k, v.sample_rate_hz),
                            decimate(data[1], k, v.sample_rate_hz))


def _fill_gaps(t: np.ndarray, a: np.ndarray) -> np.ndarray:
    ok = np.isfinite(a)
    if ok.all() or not ok.any():
        return np.where(ok, a, 0.0)
    return np.interp(t, t[ok], a[ok])


def remove_identity(p: GazeRecording, intermediate_hz: float = 25.0,
                    kind: Literal["cubic", "linear"] = "cubic") -> GazeRecording:
    """Down-sample positions to ``intermediate_hz`` and interpolate back.

    Decimation low-passes with a Kaiser-windowed sinc (cutoff at the
    intermediate Nyquist) and keeps every k-th sample; the return trip
    evaluates a cubic spline (or a linear interpolant) through the kept
    samples at the original timestamps.  Gaps are bridged linearly before
    filtering and the validity mask is carried over unchanged.
    """
    k = _integer_factor(p.sample_rate_hz, intermediate_hz)
    kernel = antialias_kernel(k, sample_rate_hz=p.sample_rate_hz)
    t = p.t_ms
    t_low = t[::k]
    out = []
    for axis in (p.x_deg, p.y_deg):
        a = _fill_gaps(t, np.where(p.valid, axis, np.nan))
        low = lowpass(a, kernel)[::k]
        if len(low) == 1:
            out.append(np.full_like(a, low[0]))
        elif kind == "cubic" and len(low) >= 3:
            out.append(CubicSpline(t_low, low, extrapolate=True)(t))
        elif kind in ("cubic", "linear"):
            out.append(np.interp(t, t_low, low))
        else:
            raise ValueError(f"unknown interpolation kind {kind!r}")
    return p.replace(x_deg=out[0], y_deg=out[1])


# --- normalization ------------------------------------------------------------------

def sanitize(v: VelocitySequence) -> VelocitySequence:
    """Non-finite samples to zero, then clamp to +-1000 deg/s."""
    data = np.nan_to_num(v.data, nan=0.0, posinf=0.0, neginf=0.0)
    data = np.clip(data, -VELOCITY_LIMIT, VELOCITY_LIMIT)
    return VelocitySequence(v.sample_rate_hz, data[0], data[1])


def normalize_array(v: np.ndarray) -> np.ndarray:
    v = np.clip(np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0), -VELOCITY_LIMIT, VELOCITY_LIMIT)
    return np.sin(np.deg2rad(v * RESCALE))


def denormalize_array(u: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if np.any(~np.isfinite(u)) or np.any(np.abs(u) > 1.0 + tol):
        raise ValueError("normalized velocity outside [-1, 1]")
    return np.rad2deg(np.arcsin(np.clip(u, -1.0, 1.0))) / RESCALE


def sanitize_and_normalize(v: VelocitySequence) -> NormalizedVelocitySequence:
    """Zero non-finite samples, clamp to +-1000 deg/s, rescale to +-90 and take the sine."""
    return NormalizedVelocitySequence(v.sample_rate_hz, normalize_array(v.vx), normalize_array(v.vy))


def denormalize(nv: VelocitySequence) -> VelocitySequence:
    """Inverse sine map back to deg/s; values more than 1e-9 outside [-1, 1] are rejected."""
    return VelocitySequence(nv.sample_rate_hz, denormalize_array(nv.vx), denormalize_array(nv.vy))


def velocity_pair(p: GazeRecording, intermediate_hz: float = 25.0, window: int = 7,
                  polyorder: int = 2, kind: str = "cubic") -> tuple[VelocitySequence, VelocitySequence]:
    """(v, v0): raw and identity-removed velocities, both sanitized, at the recording rate."""
    v = sgdf_differentiate(p, window, polyorder)
    v0 = sgdf_differentiate(remove_identity(p, intermediate_hz, kind), window, polyorder)
    return sanitize(v), sanitize(v0)
