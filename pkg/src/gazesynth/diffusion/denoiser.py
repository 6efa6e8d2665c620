"""Reference noise predictor: a small FiLM-conditioned residual conv stack.

The network sees the conditioning signal ``v0`` and the noise that would
explain ``x_t`` if the clean signal were exactly ``v0``,
``q = (x_t - sqrt(ab_t) v0) / sqrt(1 - ab_t)``.  Its output ``F`` is
subtracted from ``q``, so ``eps_hat = q - F`` and, equivalently, the
velocity estimate is ``v0 + F * sqrt(1 - ab_t) / sqrt(ab_t)``.  The step
index and the user embedding enter through per-channel scale/shift pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import Conv1d, Dense, LeakyReLU, Sequential
from .schedule import NoiseSchedule


@dataclass
class DenoiserConfig:
    channels: int = 32
    n_blocks: int = 3
    kernel_size: int = 5
    hidden: int = 64
    time_features: int = 16
    embedding_dim: int = 128
    negative_slope: float = 0.2


@dataclass
class DiffusionCondition:
    """``(v0, z)``: identity-removed normalized velocity ``(N, 2, L)`` and embeddings ``(N, 128)``."""

    v0: np.ndarray
    z: np.ndarray


class ConditionalDenoiser:
    def __init__(self, schedule: NoiseSchedule, config: DenoiserConfig | None = None,
                 rng: np.random.Generator | None = None):
        self.schedule = schedule
        self.config = cfg = config or DenoiserConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        C, k = cfg.channels, cfg.kernel_size
        pad = k // 2
        self.n_stages = cfg.n_blocks + 1
        cond_in = cfg.time_features + 1 + cfg.embedding_dim
        self.cond_mlp = Sequential([
            Dense(cond_in, cfg.hidden, rng=rng),
            LeakyReLU(cfg.negative_slope),
            Dense(cfg.hidden, 2 * C * self.n_stages, rng=rng),
        ])
        # scale/shift start at zero so the first forward pass is unmodulated
        self.cond_mlp.layers[-1].params["W"][...] = 0.0
        self.conv_in = Conv1d(4, C, k, padding=pad, rng=rng)
        self.blocks = [(Conv1d(C, C, k, padding=pad, rng=rng), Conv1d(C, C, k, padding=pad, rng=rng))
                       for _ in range(cfg.n_blocks)]
        self.acts = [LeakyReLU(cfg.negative_slope) for _ in range(self.n_stages)]
        self.conv_out = Conv1d(C, 2, k, padding=pad, rng=rng)
        self.conv_out.params["W"][...] = 0.0
        self._cache = None

    @property
    def layers(self):
        out = list(self.cond_mlp.layers) + [self.conv_in]
        for c1, c2 in self.blocks:
            out += [c1, c2]
        return out + [self.conv_out]

    def parameters(self):
        return [p for layer in self.layers for p in layer.params.values()]

    def gradients(self):
        return [layer.grads[k] for layer in self.layers for k in layer.params]

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def step_features(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64).reshape(-1)
        frac = t / self.schedule.T
        n = self.config.time_features // 2
        freqs = np.pi * 2.0 ** np.arange(n)
        ang = frac[:, None] * freqs[None, :]
        ab = self.schedule.alpha_bar[t.astype(int) - 1]
        log_snr = np.log(ab / (1.0 - ab))[:, None] / 10.0
        return np.concatenate([np.sin(ang), np.cos(ang), log_snr], axis=1)

    def forward(self, x_t, t, v0, z, training: bool = False) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        n, ch, length = x_t.shape
        if ch != 2 or np.shape(v0) != x_t.shape:
            raise ValueError(f"x_t and v0 must both be (N, 2, L); got {x_t.shape} and {np.shape(v0)}")
        t = np.broadcast_to(np.asarray(t, dtype=int), (n,))
        ab = self.schedule.at("alpha_bar", t)[:, None, None]
        q = (x_t - np.sqrt(ab) * v0) / np.sqrt(1.0 - ab)
        z = np.asarray(z, dtype=np.float64).reshape(n, -1)
        cvec = np.concatenate([self.step_features(t), z], axis=1)
        film = self.cond_mlp.forward(cvec, training).reshape(n, self.n_stages, 2, -1)
        gamma = film[:, :, 0, :, None]  # (N, S, C, 1)
        beta = film[:, :, 1, :, None]

        h0 = self.conv_in.forward(np.concatenate([q, v0], axis=1), training)
        a = self.acts[0].forward(h0 * (1.0 + gamma[:, 0]) + beta[:, 0])
        pre = []
        for i, (c1, c2) in enumerate(self.blocks, start=1):
            u = c1.forward(a, training)
            pre.append(u)
            y = self.acts[i].forward(u * (1.0 + gamma[:, i]) + beta[:, i])
            a = a + c2.forward(y, training)
        F = self.conv_out.forward(a, training)
        self._cache = (n, h0, pre, gamma)
        return q - F

    def backward(self, grad_eps_hat: np.ndarray) -> None:
        """Accumulate parameter gradients from d(loss)/d(eps_hat)."""
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        n, h0, pre, gamma = self._cache
        self._cache = None
        dfilm = np.zeros((n, self.n_stages, 2, self.config.channels))
        da = self.conv_out.backward(-grad_eps_hat)
        for i in range(len(self.blocks), 0, -1):
            c1, c2 = self.blocks[i - 1]
            dy = self.acts[i].backward(c2.backward(da))
            dfilm[:, i, 0] = np.sum(dy * pre[i - 1], axis=2)
            dfilm[:, i, 1] = np.sum(dy, axis=2)
            da = da + c1.backward(dy * (1.0 + gamma[:, i]))
        dy0 = self.acts[0].backward(da)
        dfilm[:, 0, 0] = np.sum(dy0 * h0, axis=2)
        dfilm[:, 0, 1] = np.sum(dy0, axis=2)
        self.conv_in.backward(dy0 * (1.0 + gamma[:, 0]))
        self.cond_mlp.backward(dfilm.reshape(n, -1))

    def __call__(self, x_t, t, cond: DiffusionCondition) -> np.ndarray:
        x = np.asarray(x_t, dtype=np.float64)
        single = x.ndim == 2
        if single:
            x = x[None]
        v0 = np.asarray(cond.v0, dtype=np.float64).reshape(x.shape)
        z = np.asarray(cond.z, dtype=np.float64).reshape(x.shape[0], -1)
        out = self.forward(x, t, v0, z)
        self._cache = None
        return out[0] if single else out
