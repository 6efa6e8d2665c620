"""Training objective, trainer, model bundle and synthesis for the conditional DDPM."""
from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from ..conditioning import ReferenceEncoder, UserEmbedding, cosine_similarity_grad, load_external_embeddings, write_embeddings
from ..nn import Adam, load_weights, mae_loss, mse_loss, save_weights
from ..signal import (RESCALE, GazeRecording, VelocitySequence, decimate, decimate_velocity,
                      denormalize_array, normalize_array, velocity_pair)
from .denoiser import ConditionalDenoiser, DenoiserConfig, DiffusionCondition
from .schedule import NoiseSchedule, make_schedule, noise_with, sample, velocity_convert

log = logging.getLogger(__name__)

# the inverse sine map is clipped here during training to keep its derivative finite
_DENORM_CLIP = 0.999


class DiffusionTrainingError(RuntimeError):
    pass


@dataclass
class DiffusionTrainConfig:
    T: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.05
    learning_rate: float = 2e-4
    batch_size: int = 32
    epochs: int = 60
    lambda_id: float = 0.1
    window_s: float = 5.0
    window_stride_s: float | None = None
    model_rate_hz: float = 100.0
    intermediate_hz: float = 25.0
    loss: str = "mse"
    target: str = "raw"
    seed: int = 0
    channels: int = 32
    n_blocks: int = 3
    kernel_size: int = 5
    hidden: int = 64

    def __post_init__(self):
        if self.loss not in ("mse", "mae"):
            raise ValueError("loss must be 'mse' or 'mae'")
        if self.target not in ("raw", "identity_removed"):
            raise ValueError("target must be 'raw' or 'identity_removed'")
        if not np.isfinite(self.lambda_id) or self.lambda_id < 0:
            raise ValueError("lambda_id must be finite and non-negative")
        for name in ("T", "learning_rate", "batch_size", "epochs", "window_s", "model_rate_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def window(self) -> int:
        return int(round(self.window_s * self.model_rate_hz))

    @property
    def stride(self) -> int:
        s = self.window_stride_s if self.window_stride_s else self.window_s
        return max(1, int(round(s * self.model_rate_hz)))

    def denoiser_config(self) -> DenoiserConfig:
        return DenoiserConfig(channels=self.channels, n_blocks=self.n_blocks,
                              kernel_size=self.kernel_size, hidden=self.hidden)

    def schedule(self) -> NoiseSchedule:
        return make_schedule(self.T, self.beta_start, self.beta_end)


@dataclass
class DiffusionWindow:
    """One training window at the model rate: normalized ``v`` and ``v0``, ``v`` in deg/s, and ``z``."""

    subject_id: str
    v: np.ndarray
    v0: np.ndarray
    v_deg: np.ndarray
    z: np.ndarray


def model_velocities(rec: GazeRecording, config: DiffusionTrainConfig):
    """Sanitized (v, v0) in deg/s, decimated to the model rate."""
    v, v0 = velocity_pair(rec, config.intermediate_hz)
    return decimate_velocity(v, config.model_rate_hz), decimate_velocity(v0, config.model_rate_hz)


def build_windows(recordings: list[GazeRecording], config: DiffusionTrainConfig,
                  encoder: ReferenceEncoder,
                  embeddings: dict[str, UserEmbedding] | None = None) -> list[DiffusionWindow]:
    """Cut every recording into model-rate windows; ``z`` is the encoder embedding of the
    window's own raw velocity unless an external embedding exists for the subject."""
    W, stride = config.window, config.stride
    out = []
    for rec in recordings:
        v, v0 = model_velocities(rec, config)
        v_deg = np.clip(v.data, -1000.0, 1000.0)
        nv, nv0 = normalize_array(v.data), normalize_array(v0.data)
        for a in range(0, len(v) - W + 1, stride):
            sl = slice(a, a + W)
            if embeddings and rec.subject_id in embeddings:
                z = embeddings[rec.subject_id].values
            else:
                z = encoder.encode_array(v_deg[:, sl], config.model_rate_hz)[0]
            out.append(DiffusionWindow(rec.subject_id, nv[:, sl], nv0[:, sl], v_deg[:, sl], z))
    return out


def _denorm_with_grad(u: np.ndarray):
    uc = np.clip(u, -_DENORM_CLIP, _DENORM_CLIP)
    deg = np.rad2deg(np.arcsin(uc)) / RESCALE
    d = np.where(np.abs(u) < _DENORM_CLIP, (180.0 / np.pi) / RESCALE / np.sqrt(1.0 - uc ** 2), 0.0)
    return deg, d


def loss_total(eps, eps_hat, v_hat_denorm, v_real, encoder: ReferenceEncoder, lambda_id: float,
               rate_hz: float | None = None, kind: str = "mse"):
    """Weighted objective ``L_noise + lambda * L_id``.

    ``L_noise`` is the mean squared (or absolute) error between true and
    predicted noise; ``L_id = 1 - cos(phi(v_hat), phi(v))`` averaged over the
    batch.  Velocity arguments may be ``VelocitySequence`` objects or
    ``(N, 2, L)`` arrays in deg/s (then ``rate_hz`` is required).
    Returns ``(L, {"L", "L_noise", "L_id"})``.
    """
    def as_batch(v):
        if isinstance(v, VelocitySequence):
            return v.data[None], v.sample_rate_hz
        a = np.asarray(v, dtype=np.float64)
        return (a[None] if a.ndim == 2 else a), rate_hz

    vh, rate = as_batch(v_hat_denorm)
    vr, rate_r = as_batch(v_real)
    rate = rate or rate_r
    if rate is None:
        raise ValueError("rate_hz is required for array velocities")
    if vh.shape != vr.shape:
        raise ValueError(f"v_hat {vh.shape} and v_real {vr.shape} differ in shape")
    l_noise, _ = (mse_loss if kind == "mse" else mae_loss)(np.asarray(eps_hat), np.asarray(eps))
    e_hat = encoder.encode_array(vh, rate)
    e_real = encoder.encode_array(vr, rate)
    cos, _ = cosine_similarity_grad(e_hat, e_real)
    l_id = float(np.mean(1.0 - cos))
    total = l_noise + lambda_id * l_id
    return total, {"L": total, "L_noise": l_noise, "L_id": l_id}


def _objective_and_grad(eps, eps_hat, x_t, t, schedule, z_real, encoder, config):
    """Loss components and d(loss)/d(eps_hat), back-propagating L_id through the
    velocity converter, the inverse sine map and the encoder."""
    l_noise, g = (mse_loss if config.loss == "mse" else mae_loss)(eps_hat, eps)
    v_hat = velocity_convert(x_t, eps_hat, t, schedule)
    deg, d_deg = _denorm_with_grad(v_hat)
    emb, back = encoder.encode_with_grad(deg, config.model_rate_hz)
    cos, g_cos = cosine_similarity_grad(emb, z_real)
    l_id = float(np.mean(1.0 - cos))
    if config.lambda_id > 0:
        g_emb = -config.lambda_id * g_cos / len(cos)
        g_vhat = back(g_emb) * d_deg
        ab = schedule.at("alpha_bar", t)[:, None, None]
        g = g + g_vhat * (-np.sqrt(1.0 - ab) / np.sqrt(ab))
    total = l_noise + config.lambda_id * l_id
    return {"L": total, "L_noise": l_noise, "L_id": l_id}, g


@dataclass
class DiffusionModel:
    denoiser: ConditionalDenoiser
    config: DiffusionTrainConfig
    subject_embeddings: dict[str, np.ndarray] = field(default_factory=dict)
    trace: list[dict] = field(default_factory=list)

    @property
    def schedule(self) -> NoiseSchedule:
        return self.denoiser.schedule

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_weights(d / "denoiser.gfw", self.denoiser.layers)
        lines = ["# diffusion model manifest", "format = 1"]
        for k, v in dataclasses.asdict(self.config).items():
            lines.append(f"{k} = {v}")
        (d / "manifest.txt").write_text("\n".join(lines) + "\n")
        write_embeddings(d / "embeddings.csv", self.subject_embeddings)
        write_loss_trace(d / "loss_trace.csv", self.trace)

    @classmethod
    def load(cls, directory) -> "DiffusionModel":
        from ..data.config import parse_key_values, coerce_dataclass
        d = Path(directory)
        kv = parse_key_values((d / "manifest.txt").read_text())
        kv.pop("format", None)
        config = coerce_dataclass(DiffusionTrainConfig, kv)
        den = ConditionalDenoiser(config.schedule(), config.denoiser_config())
        load_weights(d / "denoiser.gfw", den.layers)
        emb = {}
        if (d / "embeddings.csv").exists():
            emb = {k: e.values for k, e in load_external_embeddings(d / "embeddings.csv").items()}
        return cls(den, config, emb)


def write_loss_trace(path, trace: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "L", "L_noise", "L_id"])
        for row in trace:
            w.writerow([row["epoch"], repr(row["L"]), repr(row["L_noise"]), repr(row["L_id"])])


def train_diffusion(dataset: list[DiffusionWindow], encoder: ReferenceEncoder,
                    config: DiffusionTrainConfig, progress=None) -> DiffusionModel:
    """Adam on ``L_noise + lambda * L_id`` with uniformly drawn steps; seeded and deterministic.

    Steps are stratified per epoch.  The small-``t`` terms dominate the noise
    loss by orders of magnitude, so plain i.i.d. draws make the per-epoch
    trace too noisy to read.
    """
    if not dataset:
        raise ValueError("diffusion dataset is empty")
    lengths = {w.v.shape for w in dataset}
    if len(lengths) != 1:
        raise ValueError(f"all windows must share one shape, got {sorted(lengths)}")
    rng = np.random.default_rng(config.seed)
    schedule = config.schedule()
    den = ConditionalDenoiser(schedule, config.denoiser_config(), np.random.default_rng(config.seed + 1))
    opt = Adam(config.learning_rate)
    target = np.stack([w.v if config.target == "raw" else w.v0 for w in dataset])
    cond_sig = np.stack([w.v0 for w in dataset])
    z = np.stack([w.z for w in dataset])
    z_real = np.stack([encoder.encode_array(w.v_deg, config.model_rate_hz)[0] for w in dataset])
    n = len(dataset)
    trace = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        # stratified steps: every t in 1..T appears floor or ceil(n/T) times per epoch,
        # in random order, so each draw is still uniform but epoch means are comparable
        steps = rng.permutation((np.arange(n) + rng.integers(config.T)) % config.T + 1)
        sums = {"L": 0.0, "L_noise": 0.0, "L_id": 0.0}
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            t = steps[start:start + len(idx)]
            eps = rng.standard_normal(target[idx].shape)
            x_t = noise_with(target[idx], eps, t, schedule)
            eps_hat = den.forward(x_t, t, cond_sig[idx], z[idx], training=True)
            comps, g = _objective_and_grad(eps, eps_hat, x_t, t, schedule, z_real[idx], encoder, config)
            if not np.isfinite(comps["L"]):
                raise DiffusionTrainingError(
                    f"non-finite loss at epoch {epoch}, batch {batches}: {comps}")
            den.zero_grad()
            den.backward(g)
            opt.step(den.parameters(), den.gradients())
            for k in sums:
                sums[k] += comps[k]
            batches += 1
        row = {"epoch": epoch, **{k: s / batches for k, s in sums.items()}}
        trace.append(row)
        if progress:
            progress(row)
        log.debug("epoch %d L=%.5f L_noise=%.5f L_id=%.5f", epoch, row["L"], row["L_noise"], row["L_id"])
    subject_emb = {}
    for sid in sorted({w.subject_id for w in dataset}):
        m = np.mean([w.z for w in dataset if w.subject_id == sid], axis=0)
        subject_emb[sid] = m / np.linalg.norm(m)
    return DiffusionModel(den, config, subject_emb, trace)


def _window_starts(S: int, W: int) -> list[int]:
    if S <= W:
        return [0]
    starts = list(range(0, S - W + 1, W))
    if starts[-1] + W < S:
        starts.append(S - W)
    return starts


def synthesize_velocity(model: DiffusionModel, v0_norm: np.ndarray, z: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """Sample a normalized velocity sequence ``(2, S)`` conditioned on ``v0`` and ``z``.

    Long inputs are tiled with model windows; when ``S`` is not a multiple of
    the window the last window is aligned to the end and overwrites the
    overlap.  Inputs shorter than one window are zero padded and trimmed.
    """
    W = model.config.window
    S = v0_norm.shape[1]
    padded = np.zeros((2, max(S, W)))
    padded[:, :S] = v0_norm
    starts = _window_starts(S, W)
    v0_b = np.stack([padded[:, a:a + W] for a in starts])
    z_b = np.broadcast_to(np.asarray(z, dtype=np.float64), (len(starts), len(z)))
    x0 = sample(model.denoiser, DiffusionCondition(v0_b, z_b), v0_b.shape, model.schedule, rng)
    out = np.zeros_like(padded)
    for a, win in zip(starts, x0):
        out[:, a:a + W] = win
    return np.clip(out[:, :S], -1.0, 1.0)


def synthesize_recording(model: DiffusionModel, reference: GazeRecording, z: np.ndarray,
                         rng: np.random.Generator, subject_id: str | None = None) -> GazeRecording:
    """Synthesize a recording that follows ``reference``'s identity-removed motion.

    Sampling runs at the model rate; the velocity is then interpolated back to
    the reference rate (polyphase, Kaiser window) and integrated from the
    reference start point.  The reference timestamps and target channel are
    carried over.
    """
    cfg = model.config
    _, v0 = model_velocities(reference, cfg)
    vel = denormalize_array(synthesize_velocity(model, normalize_array(v0.data), z, rng))
    rate = reference.sample_rate_hz
    k = int(round(rate / cfg.model_rate_hz))
    n = reference.n_samples
    if k > 1:
        vel = resample_poly(vel, k, 1, axis=1)[:, :n]
    start = np.array([reference.x_deg[0], reference.y_deg[0]])
    if not np.all(np.isfinite(start)):
        start = np.zeros(2)
    pos = np.empty_like(vel)
    pos[:, 0] = start
    pos[:, 1:] = start[:, None] + np.cumsum(vel[:, :-1], axis=1) / rate
    return GazeRecording.from_positions(pos[0], pos[1], rate, subject_id or reference.subject_id,
                                        reference.task_label, reference.target_x_deg,
                                        reference.target_y_deg, t0_ms=float(reference.t_ms[0]))


def decimate_positions(rec: GazeRecording, rate_hz: float) -> GazeRecording:
    """Anti-aliased decimation of the gaze channels; targets are picked, not filtered."""
    if rate_hz == rec.sample_rate_hz:
        return rec
    k = int(round(rec.sample_rate_hz / rate_hz))
    x = decimate(np.where(rec.valid, rec.x_deg, 0.0), k, rec.sample_rate_hz)
    y = decimate(np.where(rec.valid, rec.y_deg, 0.0), k, rec.sample_rate_hz)
    tx = rec.target_x_deg[::k] if rec.has_target else None
    ty = rec.target_y_deg[::k] if rec.has_target else None
    return GazeRecording.from_positions(x, y, rate_hz, rec.subject_id, rec.task_label, tx, ty,
                                        valid=rec.valid[::k], t0_ms=float(rec.t_ms[0]))
