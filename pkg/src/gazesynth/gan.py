"""Conditional fixation and saccade GANs with subject-specific conditioning.

Each GAN maps ``[latent noise, SCG condition]`` to a fixed-length
two-channel velocity segment.  The condition is the DDQFE vector (scaled by
its dataset mean) followed by a one-hot subject code.

The networks work on ``u = asinh(v / s)`` with ``s`` the dataset median
velocity magnitude (or on ``v / rms`` with the linear transform).  The
compression keeps rare microsaccade peaks in range without washing out
fixation noise.  The generator output is bounded by ``B tanh(y / B)`` just
outside the training range, which stops ``sinh`` from turning small errors
in the tails into huge velocities.  Scale and bound are stored with the model.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conditioning import ddqfe, one_hot, scg_concat
from .events import EventKind, EventSegment, assemble_scanpath, samples_for_ms
from .nn import (Adam, BatchNorm, Conv1d, ConvTranspose1d, Dense, Flatten, Identity, LeakyReLU,
                 Reshape, Sequential, Sigmoid, bce_loss, load_weights, save_weights)
from .signal import GazeRecording, VelocitySequence

log = logging.getLogger(__name__)

SEGMENT_MS = {"fixation": 100.0, "saccade": 30.0}


class GanTrainingError(RuntimeError):
    pass


@dataclass
class GanConfig:
    kind: str = "fixation"
    segment_ms: float | None = None  # None: 100 ms for fixations, 30 ms for saccades
    rate_hz: float = 1000.0
    latent_dim: int = 32
    dense_channels: int = 16
    gen_filters: tuple[int, ...] = (64, 32, 2)
    gen_kernels: tuple[int, ...] = (5, 5, 5)
    disc_dense_channels: int = 8
    disc_filters: tuple[int, ...] = (32, 64, 64)
    disc_kernels: tuple[int, ...] = (5, 5, 5)
    disc_stride: int = 2
    negative_slope: float = 0.2
    learning_rate: float = 1e-4
    adam_beta1: float = 0.5
    batch_size: int = 16
    epochs: int = 100
    batchnorm: bool = True
    velocity_transform: str = "asinh"
    output_bound_margin: float | None = 1.1  # None leaves the generator output unbounded
    g_steps: int = 1  # generator updates per discriminator update
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SEGMENT_MS:
            raise ValueError(f"kind must be one of {sorted(SEGMENT_MS)}")
        if self.velocity_transform not in ("asinh", "linear"):
            raise ValueError("velocity_transform must be 'asinh' or 'linear'")
        if self.g_steps < 1:
            raise ValueError("g_steps must be at least 1")
        self.gen_filters = tuple(int(f) for f in self.gen_filters)
        self.gen_kernels = tuple(int(k) for k in self.gen_kernels)
        self.disc_filters = tuple(int(f) for f in self.disc_filters)
        self.disc_kernels = tuple(int(k) for k in self.disc_kernels)
        if len(self.gen_filters) != len(self.gen_kernels) or len(self.gen_filters) < 1:
            raise ValueError("gen_filters and gen_kernels must be non-empty and equally long")
        if self.gen_filters[-1] != 2:
            raise ValueError("the last generator block must output 2 channels")
        if len(self.disc_filters) != len(self.disc_kernels) or len(self.disc_filters) < 1:
            raise ValueError("disc_filters and disc_kernels must be non-empty and equally long")
        for name in ("latent_dim", "dense_channels", "disc_dense_channels", "disc_stride",
                     "batch_size", "epochs", "learning_rate", "rate_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.seed_length < 1:
            raise ValueError(f"generator kernels {self.gen_kernels} are too long for "
                             f"{self.length}-sample segments")

    @property
    def duration_ms(self) -> float:
        return self.segment_ms if self.segment_ms is not None else SEGMENT_MS[self.kind]

    @property
    def length(self) -> int:
        return samples_for_ms(self.duration_ms, self.rate_hz)

    @property
    def seed_length(self) -> int:
        """Length after the dense layer; each stride-1 transposed conv adds ``k - 1``."""
        return self.length - sum(k - 1 for k in self.gen_kernels)

    @property
    def use_batchnorm(self) -> bool:
        # batch statistics are degenerate for tiny batches
        return self.batchnorm and self.batch_size >= 4


def _norm(cfg: GanConfig, n: int):
    return BatchNorm(n) if cfg.use_batchnorm else Identity()


class BoundedGenerator(Sequential):
    """Layer chain whose output passes through ``B * tanh(y / B)``.

    The bound keeps generated values inside the range seen in training; with
    ``bound=None`` the output is left linear.
    """

    def __init__(self, layers, bound: float | None = None):
        super().__init__(layers)
        self.bound = bound
        self._t = None

    def forward(self, x, training=False):
        y = super().forward(x, training)
        if self.bound is None:
            return y
        self._t = np.tanh(y / self.bound)
        return self.bound * self._t

    def backward(self, grad):
        if self.bound is not None:
            grad = grad * (1.0 - self._t ** 2)
        return super().backward(grad)


def build_generator(cfg: GanConfig, cond_dim: int, rng: np.random.Generator,
                    bound: float | None = None) -> BoundedGenerator:
    """Dense -> BN -> LeakyReLU -> reshape -> transposed-conv blocks (the last one linear)."""
    c0, l0 = cfg.dense_channels, cfg.seed_length
    layers = [Dense(cfg.latent_dim + cond_dim, c0 * l0, rng=rng), _norm(cfg, c0 * l0),
              LeakyReLU(cfg.negative_slope), Reshape((c0, l0))]
    c_in = c0
    for i, (f, k) in enumerate(zip(cfg.gen_filters, cfg.gen_kernels)):
        layers.append(ConvTranspose1d(c_in, f, k, 1, rng=rng))
        if i < len(cfg.gen_filters) - 1:
            layers += [_norm(cfg, f), LeakyReLU(cfg.negative_slope)]
        c_in = f
    return BoundedGenerator(layers, bound)


class ConditionalDiscriminator:
    """Dense -> BN -> LeakyReLU -> reshape, then the condition is appended as constant
    channels before the conv blocks, flatten, dense and sigmoid."""

    def __init__(self, cfg: GanConfig, cond_dim: int, rng: np.random.Generator):
        L, c0 = cfg.length, cfg.disc_dense_channels
        self.cond_dim = cond_dim
        self.head = Sequential([Flatten(), Dense(2 * L, c0 * L, rng=rng), _norm(cfg, c0 * L),
                                LeakyReLU(cfg.negative_slope), Reshape((c0, L))])
        body = []
        c_in, length = c0 + cond_dim, L
        for f, k in zip(cfg.disc_filters, cfg.disc_kernels):
            conv = Conv1d(c_in, f, k, cfg.disc_stride, k // 2, rng=rng)
            body += [conv, LeakyReLU(cfg.negative_slope)]
            length = conv.output_length(length)
            c_in = f
        body += [Flatten(), Dense(c_in * length, 1, rng=rng), Sigmoid()]
        self.body = Sequential(body)
        self.length = L
        self.c0 = c0

    @property
    def layers(self):
        return self.head.layers + self.body.layers

    def parameters(self):
        return self.head.parameters() + self.body.parameters()

    def gradients(self):
        return self.head.gradients() + self.body.gradients()

    def zero_grad(self):
        self.head.zero_grad()
        self.body.zero_grad()

    def forward(self, x: np.ndarray, cond: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 3 or x.shape[1:] != (2, self.length):
            raise ValueError(f"discriminator expects (N, 2, {self.length}) segments, got {x.shape}")
        if cond.shape != (x.shape[0], self.cond_dim):
            raise ValueError(f"condition must be ({x.shape[0]}, {self.cond_dim}), got {cond.shape}")
        h = self.head.forward(x, training)
        tiled = np.broadcast_to(cond[:, :, None], (x.shape[0], self.cond_dim, self.length))
        return self.body.forward(np.concatenate([h, tiled], axis=1), training)[:, 0]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        g = self.body.backward(grad[:, None])
        return self.head.backward(g[:, :self.c0])


@dataclass
class LabeledSegmentDataset:
    """Fixed-length segments of one kind with their SCG conditions.

    ``data`` holds velocities in deg/s, ``(N, 2, L)``; ``ddqfe_raw`` is the DDQFE
    vector of each original (uncropped) segment.
    """

    kind: EventKind
    data: np.ndarray
    ddqfe_raw: np.ndarray
    subject_index: np.ndarray
    subject_map: dict[str, int]
    rate_hz: float

    def __post_init__(self):
        if len(self.data) == 0:
            raise ValueError("segment dataset is empty")
        n = len(self.data)
        if self.ddqfe_raw.shape != (n, 4) or self.subject_index.shape != (n,):
            raise ValueError("data, ddqfe_raw and subject_index disagree in length")

    def __len__(self):
        return len(self.data)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_map)

    @property
    def cond_dim(self) -> int:
        return 4 + self.n_subjects

    def ddqfe_scale(self) -> np.ndarray:
        s = self.ddqfe_raw.mean(axis=0)
        return np.where(s > 0, s, 1.0)

    def conditions(self, ddqfe_scale: np.ndarray | None = None) -> np.ndarray:
        scale = self.ddqfe_scale() if ddqfe_scale is None else ddqfe_scale
        return np.stack([scg_concat(f / scale, one_hot(i, self.n_subjects))
                         for f, i in zip(self.ddqfe_raw, self.subject_index)])

    def save(self, path) -> None:
        ids = sorted(self.subject_map, key=self.subject_map.get)
        np.savez(path, kind=self.kind.value, data=self.data, ddqfe_raw=self.ddqfe_raw,
                 subject_index=self.subject_index, subject_ids=np.array(ids), rate_hz=self.rate_hz)

    @classmethod
    def load(cls, path) -> "LabeledSegmentDataset":
        with np.load(path) as z:
            ids = [str(s) for s in z["subject_ids"]]
            return cls(EventKind(str(z["kind"])), z["data"], z["ddqfe_raw"],
                       z["subject_index"].astype(int), {s: i for i, s in enumerate(ids)},
                       float(z["rate_hz"]))


def fit_length(data: np.ndarray, length: int) -> np.ndarray:
    """Center-crop or symmetrically zero-pad ``(2, n)`` to ``(2, length)``."""
    n = data.shape[1]
    if n >= length:
        a = (n - length) // 2
        return data[:, a:a + length].copy()
    out = np.zeros((2, length))
    a = (length - n) // 2
    out[:, a:a + n] = data
    return out


def build_segment_dataset(segments: list[EventSegment], kind: EventKind, config: GanConfig,
                          subject_map: dict[str, int] | None = None) -> LabeledSegmentDataset:
    segs = [s for s in segments if s.kind is kind]
    if not segs:
        raise ValueError(f"no {kind.value} segments to build a dataset from")
    rates = {s.velocity.sample_rate_hz for s in segs}
    if rates != {config.rate_hz}:
        raise ValueError(f"segment rates {sorted(rates)} do not match the config rate {config.rate_hz}")
    if subject_map is None:
        subject_map = {sid: i for i, sid in enumerate(sorted({s.subject_id for s in segs}))}
    missing = sorted({s.subject_id for s in segs} - set(subject_map))
    if missing:
        raise ValueError(f"subjects missing from the subject map: {missing}")
    data, feats, idx = [], [], []
    for s in segs:
        v = np.nan_to_num(s.velocity.data, nan=0.0, posinf=0.0, neginf=0.0)
        data.append(fit_length(v, config.length))
        feats.append(ddqfe(VelocitySequence(config.rate_hz, v[0], v[1])))
        idx.append(subject_map[s.subject_id])
    return LabeledSegmentDataset(kind, np.stack(data), np.stack(feats), np.array(idx, dtype=int),
                                 dict(subject_map), config.rate_hz)


@dataclass
class GanModel:
    """Trained generator/discriminator pair plus everything needed to condition them."""

    config: GanConfig
    generator: BoundedGenerator
    discriminator: ConditionalDiscriminator
    subject_map: dict[str, int]
    velocity_scale: float
    ddqfe_scale: np.ndarray
    subject_ddqfe: dict[str, np.ndarray] = field(default_factory=dict)
    trace: list[dict] = field(default_factory=list)

    @classmethod
    def initialize(cls, config: GanConfig, subject_map: dict[str, int], velocity_scale: float = 1.0,
                   ddqfe_scale=None, seed: int | None = None,
                   output_bound: float | None = None) -> "GanModel":
        rng = np.random.default_rng(config.seed if seed is None else seed)
        cond_dim = 4 + len(subject_map)
        gen = build_generator(config, cond_dim, rng, output_bound)
        disc = ConditionalDiscriminator(config, cond_dim, rng)
        scale = np.ones(4) if ddqfe_scale is None else np.asarray(ddqfe_scale, dtype=np.float64)
        return cls(config, gen, disc, dict(subject_map), float(velocity_scale), scale)

    @property
    def cond_dim(self) -> int:
        return 4 + len(self.subject_map)

    def to_network(self, v: np.ndarray) -> np.ndarray:
        """deg/s -> network units."""
        u = np.asarray(v, dtype=np.float64) / self.velocity_scale
        return np.arcsinh(u) if self.config.velocity_transform == "asinh" else u

    def from_network(self, u: np.ndarray) -> np.ndarray:
        """Network units -> deg/s."""
        u = np.asarray(u, dtype=np.float64)
        u = np.sinh(np.clip(u, -30.0, 30.0)) if self.config.velocity_transform == "asinh" else u
        return u * self.velocity_scale

    def condition(self, subject_id: str, ddqfe_raw: np.ndarray | None = None) -> np.ndarray:
        """SCG vector for a subject; DDQFE defaults to the subject's training mean."""
        if subject_id not in self.subject_map:
            raise KeyError(f"unknown subject {subject_id!r}")
        feats = self.subject_ddqfe[subject_id] if ddqfe_raw is None else ddqfe_raw
        return scg_concat(np.asarray(feats) / self.ddqfe_scale,
                          one_hot(self.subject_map[subject_id], len(self.subject_map)))

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_weights(d / "generator.gfw", self.generator.layers)
        save_weights(d / "discriminator.gfw", self.discriminator.layers)
        lines = ["# GAN model manifest", "format = 1"]
        for k, v in dataclasses.asdict(self.config).items():
            lines.append(f"config.{k} = {', '.join(map(str, v)) if isinstance(v, tuple) else v}")
        lines.append(f"velocity_scale = {self.velocity_scale!r}")
        lines.append(f"output_bound = {self.generator.bound!r}")
        lines.append("ddqfe_scale = " + ", ".join(repr(float(x)) for x in self.ddqfe_scale))
        for sid, i in sorted(self.subject_map.items(), key=lambda kv: kv[1]):
            feats = ", ".join(repr(float(x)) for x in self.subject_ddqfe.get(sid, np.zeros(4)))
            lines.append(f"subject.{i} = {sid}")
            lines.append(f"subject_ddqfe.{i} = {feats}")
        (d / "manifest.txt").write_text("\n".join(lines) + "\n")
        with open(d / "loss_trace.csv", "w") as fh:
            fh.write("epoch,L_D,L_G\n")
            for row in self.trace:
                fh.write(f"{row['epoch']},{row['L_D']!r},{row['L_G']!r}\n")

    @classmethod
    def load(cls, directory) -> "GanModel":
        from .data.config import coerce_dataclass, parse_key_values
        d = Path(directory)
        kv = parse_key_values((d / "manifest.txt").read_text())
        cfg = coerce_dataclass(GanConfig, {k[7:]: v for k, v in kv.items() if k.startswith("config.")})
        n = sum(1 for k in kv if k.startswith("subject."))
        ids = [kv[f"subject.{i}"] for i in range(n)]

        def vec(s):
            return np.array([float(x) for x in s.split(",")])

        model = cls.initialize(cfg, {s: i for i, s in enumerate(ids)}, float(kv["velocity_scale"]),
                               vec(kv["ddqfe_scale"]),
                               output_bound=None if kv["output_bound"] == "None" else float(kv["output_bound"]))
        model.subject_ddqfe = {s: vec(kv[f"subject_ddqfe.{i}"]) for i, s in enumerate(ids)}
        load_weights(d / "generator.gfw", model.generator.layers)
        load_weights(d / "discriminator.gfw", model.discriminator.layers)
        return model


def _check_noise_cond(model: GanModel, noise, cond):
    noise = np.atleast_2d(np.asarray(noise, dtype=np.float64))
    cond = np.atleast_2d(np.asarray(cond, dtype=np.float64))
    if noise.shape[1] != model.config.latent_dim:
        raise ValueError(f"latent noise must have {model.config.latent_dim} entries, got {noise.shape[1]}")
    if cond.shape[1] != model.cond_dim:
        raise ValueError(f"condition must have {model.cond_dim} entries, got {cond.shape[1]}")
    if len(noise) != len(cond):
        raise ValueError("noise and condition batches differ in size")
    return noise, cond


def generate_batch(model: GanModel, noise, cond) -> np.ndarray:
    """Generator output in deg/s, ``(N, 2, L)``; inference mode, deterministic."""
    noise, cond = _check_noise_cond(model, noise, cond)
    out = model.generator.forward(np.concatenate([noise, cond], axis=1), training=False)
    return model.from_network(out)


def generate(model: GanModel, noise, cond) -> VelocitySequence:
    """One velocity segment ``2 x L`` from a latent vector and an SCG condition."""
    out = generate_batch(model, np.reshape(noise, (1, -1)), np.reshape(cond, (1, -1)))[0]
    return VelocitySequence(model.config.rate_hz, out[0], out[1])


def discriminate(model: GanModel, segment, cond) -> float:
    """Probability that ``segment`` (deg/s) is a real sample under condition ``cond``."""
    data = segment.data if isinstance(segment, VelocitySequence) else np.asarray(segment, dtype=np.float64)
    if data.shape != (2, model.config.length):
        raise ValueError(f"segment must be (2, {model.config.length}), got {data.shape}")
    cond = np.asarray(cond, dtype=np.float64).reshape(1, -1)
    if cond.shape[1] != model.cond_dim:
        raise ValueError(f"condition must have {model.cond_dim} entries, got {cond.shape[1]}")
    return float(model.discriminator.forward(model.to_network(data[None]), cond)[0])


def discriminator_loss(p_real: np.ndarray, p_fake: np.ndarray):
    """``-log D(real) - log(1 - D(fake))`` as a sum of batch means, with gradients."""
    l_r, g_r = bce_loss(p_real, 1.0)
    l_f, g_f = bce_loss(p_fake, 0.0)
    return l_r + l_f, g_r, g_f


def generator_loss(p_fake: np.ndarray):
    """Non-saturating ``-log D(G(z, c), c)``."""
    return bce_loss(p_fake, 1.0)


class GanTrainer:
    """Alternating updates.  Real and fake samples share one discriminator batch so that
    batch normalization sees both; each step only moves its own network."""

    def __init__(self, model: GanModel, data_scaled: np.ndarray, cond: np.ndarray,
                 rng: np.random.Generator):
        self.model = model
        self.data = data_scaled
        self.cond = cond
        self.rng = rng
        cfg = model.config
        self.opt_g = Adam(cfg.learning_rate, beta1=cfg.adam_beta1)
        self.opt_d = Adam(cfg.learning_rate, beta1=cfg.adam_beta1)

    def _fake(self, cond: np.ndarray, training: bool) -> np.ndarray:
        noise = self.rng.standard_normal((len(cond), self.model.config.latent_dim))
        return self.model.generator.forward(np.concatenate([noise, cond], axis=1), training)

    def d_step(self, idx: np.ndarray, generator_training: bool = True) -> float:
        m = self.model
        cond = self.cond[idx]
        fake = self._fake(cond, generator_training)
        if generator_training:
            m.generator.zero_grad()
        p = m.discriminator.forward(np.concatenate([self.data[idx], fake]),
                                    np.concatenate([cond, cond]), training=True)
        b = len(idx)
        loss, g_r, g_f = discriminator_loss(p[:b], p[b:])
        if not np.isfinite(loss):
            raise GanTrainingError(f"non-finite discriminator loss {loss}")
        m.discriminator.zero_grad()
        m.discriminator.backward(np.concatenate([g_r, g_f]))
        self.opt_d.step(m.discriminator.parameters(), m.discriminator.gradients())
        return loss

    def g_step(self, idx: np.ndarray) -> float:
        m = self.model
        cond = self.cond[idx]
        fake = self._fake(cond, True)
        p = m.discriminator.forward(np.concatenate([self.data[idx], fake]),
                                    np.concatenate([cond, cond]), training=True)
        b = len(idx)
        loss, g_f = generator_loss(p[b:])
        if not np.isfinite(loss):
            raise GanTrainingError(f"non-finite generator loss {loss}")
        m.discriminator.zero_grad()
        g_in = m.discriminator.backward(np.concatenate([np.zeros(b), g_f]))
        m.generator.zero_grad()
        m.generator.backward(g_in[b:])
        self.opt_g.step(m.generator.parameters(), m.generator.gradients())
        m.discriminator.zero_grad()
        return loss


def discriminator_accuracy(model: GanModel, real: np.ndarray, cond: np.ndarray,
                           rng: np.random.Generator) -> float:
    """Balanced real/fake accuracy at threshold 0.5 on a combined batch (inference mode)."""
    noise = rng.standard_normal((len(cond), model.config.latent_dim))
    fake = model.generator.forward(np.concatenate([noise, cond], axis=1), training=False)
    p = model.discriminator.forward(np.concatenate([model.to_network(real), fake]),
                                    np.concatenate([cond, cond]), training=False)
    b = len(real)
    return float((np.sum(p[:b] > 0.5) + np.sum(p[b:] <= 0.5)) / (2 * b))


def prepare_model(dataset: LabeledSegmentDataset, config: GanConfig, seed: int | None = None):
    """Fresh model sized for ``dataset`` with its scales and per-subject mean DDQFE."""
    if config.length != dataset.data.shape[2]:
        raise ValueError(f"dataset segments have {dataset.data.shape[2]} samples, config expects "
                         f"{config.length}")
    mag = np.abs(dataset.data)
    # asinh works in units of a typical small velocity; the linear map uses the RMS
    v_scale = float(np.median(mag) if config.velocity_transform == "asinh" else np.sqrt(np.mean(mag ** 2)))
    v_scale = v_scale if v_scale > 0 else 1.0
    bound = None
    if config.output_bound_margin is not None:
        u = np.asarray(dataset.data) / v_scale
        u = np.arcsinh(u) if config.velocity_transform == "asinh" else u
        bound = float(config.output_bound_margin * max(np.abs(u).max(), 1e-6))
    model = GanModel.initialize(config, dataset.subject_map, v_scale, dataset.ddqfe_scale(), seed,
                                bound)
    for sid, i in dataset.subject_map.items():
        sel = dataset.subject_index == i
        model.subject_ddqfe[sid] = (dataset.ddqfe_raw[sel].mean(axis=0) if sel.any()
                                    else dataset.ddqfe_raw.mean(axis=0))
    return model


def train_gan(dataset: LabeledSegmentDataset, config: GanConfig, seed: int | None = None,
              progress=None) -> GanModel:
    """Alternate one discriminator update and ``config.g_steps`` generator updates per
    minibatch; per-epoch mean ``L_D`` and ``L_G`` go into ``model.trace``."""
    seed = config.seed if seed is None else seed
    model = prepare_model(dataset, config, seed)
    rng = np.random.default_rng([seed, 1])
    trainer = GanTrainer(model, model.to_network(dataset.data),
                         dataset.conditions(model.ddqfe_scale), rng)
    n = len(dataset)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        ld, lg, k = 0.0, 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            ld += trainer.d_step(idx)
            for _ in range(config.g_steps):
                lg += trainer.g_step(idx) / config.g_steps
            k += 1
        row = {"epoch": epoch, "L_D": ld / k, "L_G": lg / k}
        model.trace.append(row)
        if progress:
            progress(row)
        log.debug("%s epoch %d L_D=%.4f L_G=%.4f", config.kind, epoch, row["L_D"], row["L_G"])
    return model


def synthesize_scanpath(fix_model: GanModel, sac_model: GanModel, subject_id: str, n_fixations: int,
                        rng: np.random.Generator, start_pos=(0.0, 0.0),
                        reference: VelocitySequence | None = None,
                        task_label: str = "synthetic") -> GazeRecording:
    """Draw ``n`` fixations and ``n - 1`` saccades for one subject and chain them.

    The DDQFE part of the condition comes from ``reference`` when given,
    otherwise from the subject's training-set mean.
    """
    if n_fixations < 1:
        raise ValueError("n_fixations must be at least 1")
    if fix_model.config.rate_hz != sac_model.config.rate_hz:
        raise ValueError("fixation and saccade models use different sample rates")
    feats = None if reference is None else ddqfe(reference)
    parts = {}
    for name, model, count in (("fix", fix_model, n_fixations), ("sac", sac_model, n_fixations - 1)):
        if count == 0:
            parts[name] = []
            continue
        cond = np.tile(model.condition(subject_id, feats), (count, 1))
        noise = rng.standard_normal((count, model.config.latent_dim))
        out = generate_batch(model, noise, cond)
        parts[name] = [VelocitySequence(model.config.rate_hz, o[0], o[1]) for o in out]
    return assemble_scanpath(parts["fix"], parts["sac"], n_fixations, start_pos, subject_id,
                             task_label)


def synthesize_like(fix_model: GanModel, sac_model: GanModel, subject_id: str,
                    reference: GazeRecording, rng: np.random.Generator,
                    n_fixations: int | None = None) -> GazeRecording:
    """A scanpath at least as long as ``reference``, cropped to its length.

    The path starts at the reference's first gaze sample and carries its
    target columns, so accuracy metrics stay defined on the synthetic file.
    """
    fix_len, sac_len = fix_model.config.length, sac_model.config.length
    n = n_fixations or max(1, math.ceil((reference.n_samples + sac_len) / (fix_len + sac_len)))
    x0, y0 = reference.x_deg[0], reference.y_deg[0]
    start = (x0, y0) if np.isfinite([x0, y0]).all() else (0.0, 0.0)
    path = synthesize_scanpath(fix_model, sac_model, subject_id, n, rng, start,
                               task_label=reference.task_label)
    m = min(path.n_samples, reference.n_samples)
    tx = reference.target_x_deg[:m] if reference.has_target else None
    ty = reference.target_y_deg[:m] if reference.has_target else None
    return GazeRecording.from_positions(path.x_deg[:m], path.y_deg[:m], path.sample_rate_hz,
                                        subject_id, reference.task_label, tx, ty,
                                        t0_ms=float(reference.t_ms[0]))
