"""DDPM noise schedule, forward noising, velocity conversion and reverse sampling.

Step indices are 1-based: ``t`` runs over ``1..T`` and ``alpha_bar[t-1]``
holds the cumulative product up to step ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    posterior_var: np.ndarray

    def check_step(self, t):
        ts = np.asarray(t)
        if np.any(ts < 1) or np.any(ts > self.T):
            raise ValueError(f"diffusion step must lie in [1, {self.T}], got {t}")
        return ts

    def at(self, name: str, t):
        """Schedule constant ``name`` at (possibly vector) step ``t``."""
        ts = self.check_step(t)
        return getattr(self, name)[ts - 1]


def make_schedule(T: int = 50, beta_start: float = 1e-4, beta_end: float = 0.05) -> NoiseSchedule:
    """Linear beta schedule with inclusive endpoints."""
    if T < 1:
        raise ValueError("T must be at least 1")
    if not 0 < beta_start <= beta_end < 1:
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    alpha_bar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    posterior_var = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * beta
    return NoiseSchedule(T, beta, alpha, alpha_bar, posterior_var)


def _bcast(coef, like: np.ndarray) -> np.ndarray:
    coef = np.asarray(coef, dtype=np.float64)
    if coef.ndim == 0:
        return coef
    return coef.reshape(coef.shape + (1,) * (like.ndim - coef.ndim))


def noise_with(v0: np.ndarray, eps: np.ndarray, t, schedule: NoiseSchedule) -> np.ndarray:
    """``sqrt(ab_t) * v0 + sqrt(1 - ab_t) * eps`` for a given noise draw."""
    ab = _bcast(schedule.at("alpha_bar", t), v0)
    return np.sqrt(ab) * v0 + np.sqrt(1.0 - ab) * eps


def forward_noise(v0: np.ndarray, t, schedule: NoiseSchedule, rng: np.random.Generator):
    """Noise a clean signal to step ``t``; returns ``(x_t, eps)``."""
    v0 = np.asarray(v0, dtype=np.float64)
    eps = rng.standard_normal(v0.shape)
    return noise_with(v0, eps, t, schedule), eps


def velocity_convert(x_t: np.ndarray, eps_hat: np.ndarray, t, schedule: NoiseSchedule) -> np.ndarray:
    """Clean-signal estimate ``(x_t - sqrt(1 - ab_t) * eps_hat) / sqrt(ab_t)``."""
    if np.shape(x_t) != np.shape(eps_hat):
        raise ValueError(f"x_t {np.shape(x_t)} and eps_hat {np.shape(eps_hat)} differ in shape")
    ab = _bcast(schedule.at("alpha_bar", t), np.asarray(x_t))
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def posterior_mean(x_t: np.ndarray, eps_hat: np.ndarray, t, schedule: NoiseSchedule) -> np.ndarray:
    a = _bcast(schedule.at("alpha", t), x_t)
    ab = _bcast(schedule.at("alpha_bar", t), x_t)
    return (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a)


Denoiser = Callable[[np.ndarray, int, object], np.ndarray]


def reverse_step(x_t: np.ndarray, t: int, denoiser: Denoiser, cond, schedule: NoiseSchedule,
                 rng: np.random.Generator) -> np.ndarray:
    """One ancestral step ``x_t -> x_{t-1}``; the final step (t = 1) adds no noise."""
    schedule.check_step(t)
    eps_hat = np.asarray(denoiser(x_t, t, cond))
    if eps_hat.shape != np.shape(x_t):
        raise ValueError(f"denoiser returned shape {eps_hat.shape}, expected {np.shape(x_t)}")
    mu = posterior_mean(x_t, eps_hat, t, schedule)
    if t == 1:
        return mu
    sigma = np.sqrt(schedule.posterior_var[t - 1])
    return mu + sigma * rng.standard_normal(np.shape(x_t))


def sample(denoiser: Denoiser, cond, shape, schedule: NoiseSchedule, rng: np.random.Generator,
           x_T: np.ndarray | None = None) -> np.ndarray:
    """Run the full reverse chain from ``x_T ~ N(0, I)``."""
    x = rng.standard_normal(shape) if x_T is None else np.array(x_T, dtype=np.float64)
    for t in range(schedule.T, 0, -1):
        x = reverse_step(x, t, denoiser, cond, schedule, rng)
    return x


def oracle_denoiser(v0: np.ndarray, schedule: NoiseSchedule) -> Denoiser:
    """Denoiser returning the exact noise for a known clean signal ``v0``."""
    def predict(x_t, t, cond=None):
        ab = schedule.at("alpha_bar", t)
        return (x_t - np.sqrt(ab) * v0) / np.sqrt(1.0 - ab)
    return predict
