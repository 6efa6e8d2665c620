"""Parametric oculomotor simulator producing subject-distinguishable toy recordings.

Gaze follows a stepping target after a reaction latency.  Saccades use a
minimum-jerk position profile whose duration follows the main-sequence rule
``2.2 * amplitude + 21`` ms, divided by the subject's peak-velocity scale.
Fixations add linear drift, occasional microsaccades and white position
noise.  All constants are simulator defaults, not measured values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..signal import GazeRecording

TASKS = ("HSS", "RAN", "FIX")


@dataclass
class SimulatorProfile:
    subject_id: str
    fixation_noise_std: float = 0.02
    drift_rate: float = 0.3
    saccade_peak_velocity_scale: float = 1.0
    microsaccade_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("fixation_noise_std", "drift_rate", "microsaccade_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.saccade_peak_velocity_scale <= 0:
            raise ValueError("saccade_peak_velocity_scale must be positive")


@dataclass
class TaskSettings:
    """The simulator-facing part of a run configuration."""

    task: str = "HSS"
    duration_s: float = 5.0
    rate_hz: float = 1000.0
    hss_amplitude_deg: float = 15.0
    ran_half_width_deg: float = 15.0
    target_period_s: float = 1.0
    latency_ms: float = 200.0
    latency_jitter_ms: float = 20.0
    microsaccade_amplitude_deg: float = 0.3
    seed: int = 0


def default_profiles(n_subjects: int, seed: int = 0) -> list[SimulatorProfile]:
    """Subjects spread over noise, drift, peak-velocity and microsaccade settings."""
    if n_subjects < 1:
        raise ValueError("need at least one subject")
    u = np.linspace(0.0, 1.0, n_subjects) if n_subjects > 1 else np.array([0.5])
    return [
        SimulatorProfile(
            subject_id=f"S{i:03d}",
            fixation_noise_std=float(0.01 * 5.0 ** u[i]),
            drift_rate=float(0.1 + 0.5 * u[i]),
            saccade_peak_velocity_scale=float(0.8 + 0.45 * u[i]),
            microsaccade_rate=float(0.5 + 1.5 * u[i]),
            seed=seed * 1000 + i,
        )
        for i in range(n_subjects)
    ]


def min_jerk(n: int) -> np.ndarray:
    """Normalized minimum-jerk position profile over ``n`` samples, 0 -> 1."""
    tau = np.arange(1, n + 1) / n
    return 10 * tau ** 3 - 15 * tau ** 4 + 6 * tau ** 5


def main_sequence_ms(amplitude_deg: float, scale: float) -> float:
    return (2.2 * amplitude_deg + 21.0) / scale


def target_schedule(settings: TaskSettings, n: int, rng: np.random.Generator):
    """Target x/y arrays and the sample indices where the target jumps."""
    rate = settings.rate_hz
    period = max(1, int(round(settings.target_period_s * rate)))
    n_steps = -(-n // period)
    if settings.task == "HSS":
        a = settings.hss_amplitude_deg
        xs = np.where(np.arange(n_steps) % 2 == 0, a, -a)
        ys = np.zeros(n_steps)
    elif settings.task == "RAN":
        w = settings.ran_half_width_deg
        xs = rng.uniform(-w, w, n_steps)
        ys = rng.uniform(-w, w, n_steps)
    elif settings.task == "FIX":
        xs = np.zeros(n_steps)
        ys = np.zeros(n_steps)
    else:
        raise ValueError(f"unknown task {settings.task!r}; expected one of {TASKS}")
    idx = np.minimum(np.arange(n) // period, n_steps - 1)
    jumps = [k * period for k in range(1, n_steps)
             if xs[k] != xs[k - 1] or ys[k] != ys[k - 1]]
    return xs[idx].astype(float), ys[idx].astype(float), jumps


def simulate_recording(profile: SimulatorProfile, settings: TaskSettings,
                       session: int = 0) -> GazeRecording:
    """Deterministic for a given (profile, settings, session)."""
    rate = settings.rate_hz
    n = int(round(settings.duration_s * rate))
    if n < 1 or abs(settings.duration_s * rate - n) > 1e-9:
        raise ValueError("duration_s * rate_hz must be a positive integer")
    rng = np.random.default_rng([profile.seed, settings.seed, session])
    tx, ty, jumps = target_schedule(settings, n, rng)
    dt = 1.0 / rate
    gaze = np.empty((2, n))
    pos = np.array([tx[0], ty[0]])

    def fixate(a: int, b: int, anchor: np.ndarray):
        nonlocal pos
        if b <= a:
            return
        theta = rng.uniform(0, 2 * np.pi)
        drift = profile.drift_rate * dt * np.array([np.cos(theta), np.sin(theta)])
        k = a
        n_micro = rng.poisson(profile.microsaccade_rate * (b - a) * dt)
        onsets = np.sort(rng.integers(a, b, size=n_micro)) if n_micro else []
        for onset in list(onsets) + [b]:
            m = onset - k
            if m > 0:
                gaze[:, k:onset] = pos[:, None] + drift[:, None] * np.arange(1, m + 1)
                pos = gaze[:, onset - 1].copy()
                k = onset
            if onset >= b:
                break
            offset = anchor - pos
            amp = settings.microsaccade_amplitude_deg
            if np.linalg.norm(offset) > amp / 2:
                direction = offset / np.linalg.norm(offset)
            else:
                phi = rng.uniform(0, 2 * np.pi)
                direction = np.array([np.cos(phi), np.sin(phi)])
            k = saccade(k, b, pos + amp * direction)

    def saccade(a: int, limit: int, goal: np.ndarray) -> int:
        nonlocal pos
        amp = float(np.linalg.norm(goal - pos))
        m = max(1, int(round(main_sequence_ms(amp, profile.saccade_peak_velocity_scale) * rate / 1000)))
        m = min(m, limit - a)
        if m <= 0:
            return a
        prof = min_jerk(max(m, 1))
        gaze[:, a:a + m] = pos[:, None] + (goal - pos)[:, None] * prof[None, :m]
        pos = gaze[:, a + m - 1].copy()
        return a + m

    cursor = 0
    anchor = pos.copy()
    for j in jumps:
        lat = settings.latency_ms + settings.latency_jitter_ms * rng.standard_normal()
        onset = min(n, max(j, j + int(round(lat * rate / 1000))))
        fixate(cursor, onset, anchor)
        cursor = onset
        anchor = np.array([tx[j], ty[j]])
        if cursor < n:
            cursor = saccade(cursor, n, anchor)
    fixate(cursor, n, anchor)
    if profile.fixation_noise_std > 0:
        gaze = gaze + profile.fixation_noise_std * rng.standard_normal(gaze.shape)
    return GazeRecording.from_positions(gaze[0], gaze[1], rate, profile.subject_id,
                                        settings.task, tx, ty)
