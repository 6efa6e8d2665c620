"""Identity representations.

* ``ReferenceEncoder``: a deterministic, differentiable stand-in for a
  pretrained 128-d gaze identity encoder.  Anything mapping a
  ``VelocitySequence`` to a 128-vector satisfies the same contract; real
  embeddings can be loaded from CSV with :func:`load_external_embeddings`.
* DDQFE + one-hot: the subject condition fed to the GAN generators.
"""
from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal import VelocitySequence

EMBEDDING_DIM = 128
N_BANDS = 29
N_FEATURES = 64
# ASCII "EKYT"
ENCODER_SEED = 0x454B5954


class EmbeddingSource(enum.Enum):
    REFERENCE = "reference"
    EXTERNAL = "external"


@dataclass(frozen=True, eq=False)
class UserEmbedding:
    values: np.ndarray
    source: EmbeddingSource = EmbeddingSource.REFERENCE

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding contains non-finite values")
        if not np.linalg.norm(v) > 0:
            raise ValueError("embedding has zero norm")
        object.__setattr__(self, "values", v)


def _as_vector(a) -> np.ndarray:
    if isinstance(a, UserEmbedding):
        return a.values
    return np.asarray(a, dtype=np.float64).reshape(-1)


def cosine_similarity(a, b) -> float:
    a, b = _as_vector(a), _as_vector(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_similarity_grad(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cosine of ``(N, D)`` arrays and its gradient w.r.t. ``a``."""
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    ua, ub = a / na, b / nb
    cos = np.sum(ua * ub, axis=1)
    grad = (ub - ua * cos[:, None]) / na
    return cos, grad


class ReferenceEncoder:
    """Velocity window -> unit-norm 128-d embedding.

    Per axis the feature map takes ``asinh(stat / 10 deg/s)`` of the mean,
    standard deviation and RMS, plus the log mean power in 29 log-spaced bands
    from 0.5 Hz to Nyquist (64 features).  The feature vector is standardized
    across its entries, projected by a fixed Gaussian 64x128 matrix drawn
    from ``seed`` and scaled to unit length.
    """

    min_length = 256
    dim = EMBEDDING_DIM

    def __init__(self, seed: int = ENCODER_SEED, stat_scale: float = 10.0,
                 power_floor: float = 1e-6, f_min: float = 0.5):
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((N_FEATURES, EMBEDDING_DIM)) / np.sqrt(N_FEATURES)
        self.stat_scale = stat_scale
        self.power_floor = power_floor
        self.f_min = f_min
        self._bank_cache: dict[tuple[int, float], np.ndarray] = {}

    def band_matrix(self, length: int, rate_hz: float) -> np.ndarray:
        """(29, length//2+1) averaging weights over rfft bins; empty bands take the nearest bin."""
        key = (length, rate_hz)
        if key not in self._bank_cache:
            freqs = np.fft.rfftfreq(length, 1.0 / rate_hz)
            edges = np.geomspace(self.f_min, rate_hz / 2.0, N_BANDS + 1)
            W = np.zeros((N_BANDS, len(freqs)))
            for b in range(N_BANDS):
                lo, hi = edges[b], edges[b + 1]
                sel = (freqs >= lo) & ((freqs < hi) if b < N_BANDS - 1 else (freqs <= hi))
                if sel.any():
                    W[b, sel] = 1.0 / sel.sum()
                else:
                    W[b, np.argmin(np.abs(freqs - np.sqrt(lo * hi)))] = 1.0
            self._bank_cache[key] = W
        return self._bank_cache[key]

    # -- forward/backward on raw arrays -------------------------------------------

    def _forward(self, data: np.ndarray, rate_hz: float):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[None]
        n, ch, length = data.shape
        if ch != 2:
            raise ValueError(f"expected 2 velocity channels, got {ch}")
        if length < self.min_length:
            raise ValueError(f"encoder needs at least {self.min_length} samples, got {length}")
        k = self.stat_scale
        mean = data.mean(-1)
        centered = data - mean[..., None]
        std = np.sqrt((centered ** 2).mean(-1) + 1e-12)
        rms = np.sqrt((data ** 2).mean(-1) + 1e-12)
        stats = np.stack([mean, std, rms], axis=-1)  # (N, 2, 3)
        stat_feat = np.arcsinh(stats / k)
        X = np.fft.rfft(data, axis=-1)
        power = (X.real ** 2 + X.imag ** 2) / length ** 2
        W = self.band_matrix(length, rate_hz)
        band = power @ W.T  # (N, 2, 29)
        band_feat = np.log(band + self.power_floor)
        f = np.concatenate([stat_feat.reshape(n, 6), band_feat.reshape(n, 2 * N_BANDS)], axis=1)
        mu = f.mean(1, keepdims=True)
        sd = np.sqrt(((f - mu) ** 2).mean(1, keepdims=True) + 1e-12)
        fn = (f - mu) / sd
        e = fn @ self.projection
        norm = np.linalg.norm(e, axis=1, keepdims=True)
        out = e / norm
        cache = (data, mean, centered, std, rms, stats, band, fn, sd, norm, out, W)
        return out, cache

    def _backward(self, grad_out: np.ndarray, cache) -> np.ndarray:
        data, mean, centered, std, rms, stats, band, fn, sd, norm, out, W = cache
        n, _, length = data.shape
        k = self.stat_scale
        g_e = (grad_out - out * np.sum(out * grad_out, axis=1, keepdims=True)) / norm
        g_fn = g_e @ self.projection.T
        g_f = (g_fn - g_fn.mean(1, keepdims=True)
               - fn * np.mean(g_fn * fn, axis=1, keepdims=True)) / sd
        g_stat = g_f[:, :6].reshape(n, 2, 3) / np.sqrt(1.0 + (stats / k) ** 2) / k
        g_band = g_f[:, 6:].reshape(n, 2, N_BANDS) / (band + self.power_floor)
        g_data = g_stat[..., 0:1] / length
        g_data = g_data + g_stat[..., 1:2] * centered / (length * std[..., None])
        g_data = g_data + g_stat[..., 2:3] * data / (length * rms[..., None])
        # d/dv sum_k c_k |X_k|^2 = 2 Re(ifft(c * fft(v))) * L, and power carries 1/L^2
        c_half = g_band @ W  # (N, 2, L//2+1)
        c_full = np.zeros((n, 2, length))
        c_full[..., :c_half.shape[-1]] = c_half
        spec = np.fft.fft(data, axis=-1)
        g_data = g_data + 2.0 * np.real(np.fft.ifft(c_full * spec, axis=-1)) / length
        return g_data

    def encode_array(self, data: np.ndarray, rate_hz: float) -> np.ndarray:
        """(N, 2, L) or (2, L) velocities -> (N, 128) unit embeddings."""
        out, _ = self._forward(data, rate_hz)
        return out

    def encode_with_grad(self, data: np.ndarray, rate_hz: float):
        """Embeddings plus a closure mapping d(loss)/d(embedding) to d(loss)/d(data)."""
        out, cache = self._forward(data, rate_hz)
        return out, lambda g: self._backward(np.asarray(g, dtype=np.float64), cache)

    def __call__(self, v: VelocitySequence) -> UserEmbedding:
        return self.encode(v)

    def encode(self, v: VelocitySequence) -> UserEmbedding:
        return UserEmbedding(self.encode_array(v.data, v.sample_rate_hz)[0], EmbeddingSource.REFERENCE)


def reference_encode(v: VelocitySequence, encoder: ReferenceEncoder | None = None) -> UserEmbedding:
    return (encoder or ReferenceEncoder()).encode(v)


# --- subject-specific condition (GAN side) -------------------------------------------

def ddqfe(v: VelocitySequence) -> np.ndarray:
    """[std_x, std_y, rms_x, rms_y] of the displacement profile ``cumsum(v) / rate``."""
    if len(v) == 0:
        raise ValueError("DDQFE needs a non-empty velocity sequence")
    d = np.cumsum(v.data, axis=1) / v.sample_rate_hz
    std = d.std(axis=1)
    rms = np.sqrt(np.mean(d ** 2, axis=1))
    return np.array([std[0], std[1], rms[0], rms[1]])


def one_hot(subject_index: int, n_subjects: int) -> np.ndarray:
    if n_subjects < 1 or not 0 <= subject_index < n_subjects:
        raise ValueError(f"subject index {subject_index} out of range for {n_subjects} subjects")
    out = np.zeros(n_subjects)
    out[subject_index] = 1.0
    return out


def scg_concat(ddqfe_features, one_hot_vec) -> np.ndarray:
    """DDQFE features followed by the one-hot code (length 4 + N)."""
    feats = np.asarray(ddqfe_features, dtype=np.float64).reshape(-1)
    oh = np.asarray(one_hot_vec, dtype=np.float64).reshape(-1)
    if feats.shape != (4,):
        raise ValueError(f"DDQFE vector must have 4 entries, got {feats.shape[0]}")
    if oh.size == 0:
        raise ValueError("one-hot vector must not be empty")
    if np.any(feats < 0) or not np.isclose(oh.sum(), 1.0) or np.any((oh != 0) & (oh != 1)):
        raise ValueError("invalid SCG condition: DDQFE must be >= 0 and one-hot must hold a single 1")
    return np.concatenate([feats, oh])


# --- embedding files ---------------------------------------------------------------------

def embedding_header() -> list[str]:
    return ["subject_id"] + [f"e{i}" for i in range(EMBEDDING_DIM)]


def write_embeddings(path, embeddings: dict[str, UserEmbedding | np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(embedding_header())
        for sid, emb in embeddings.items():
            w.writerow([sid] + [repr(float(x)) for x in _as_vector(emb)])


def load_external_embeddings(path) -> dict[str, UserEmbedding]:
    """Read ``subject_id,e0,...,e127`` rows; every row must carry 128 values."""
    text = Path(path).read_text()
    rows = list(csv.reader(text.splitlines()))
    rows = [r for r in rows if r]
    if len(rows) <= 1:
        warnings.warn(f"embedding file {path} holds no embeddings", stacklevel=2)
        return {}
    header, body = rows[0], rows[1:]
    if header[0] != "subject_id":
        raise ValueError("embedding file must start with a subject_id column")
    if len(header) != EMBEDDING_DIM + 1:
        raise ValueError(f"header declares {len(header) - 1} dims, expected {EMBEDDING_DIM}")
    out = {}
    for lineno, row in enumerate(body, start=2):
        if len(row) - 1 != EMBEDDING_DIM:
            raise ValueError(
                f"row {lineno} ({row[0]!r}) has {len(row) - 1} values, expected {EMBEDDING_DIM}"
            )
        out[row[0]] = UserEmbedding(np.array([float(x) for x in row[1:]]), EmbeddingSource.EXTERNAL)
    return out
