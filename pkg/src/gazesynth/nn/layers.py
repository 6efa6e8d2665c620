"""Layers with hand-written forward/backward passes.

Tensors are plain float64 arrays, batch first: ``(N, F)`` for dense data and
``(N, C, L)`` for sequences.  Every layer caches what its backward pass needs
during ``forward`` and stores parameter gradients in ``grads``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KIND_IDS = {
    "Dense": 1,
    "Conv1d": 2,
    "ConvTranspose1d": 3,
    "BatchNorm": 4,
    "LeakyReLU": 5,
    "Sigmoid": 6,
    "Reshape": 7,
    "Flatten": 8,
    "Identity": 9,
}


class ShapeError(ValueError):
    pass


class MissingCacheError(RuntimeError):
    pass


@dataclass
class LayerSpec:
    """Layer kind plus its hyperparameters, e.g. ``LayerSpec("Dense", in_features=4, out_features=8)``."""

    kind: str
    options: dict = field(default_factory=dict)

    def __init__(self, kind: str, **options):
        if kind not in KIND_IDS:
            raise ValueError(f"unknown layer kind {kind!r}")
        self.kind = kind
        self.options = options


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "Identity"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._cache = None

    @property
    def kind_id(self) -> int:
        return KIND_IDS[self.kind]

    def tensors(self) -> list[np.ndarray]:
        """Parameters then buffers, in a fixed order (used by the weight file)."""
        return list(self.params.values()) + list(self.buffers.values())

    def set_tensors(self, arrays: list[np.ndarray]):
        names = list(self.params) + list(self.buffers)
        for name, a in zip(names, arrays):
            store = self.params if name in self.params else self.buffers
            if store[name].shape != a.shape:
                raise ShapeError(f"{self.kind}.{name}: expected {store[name].shape}, got {a.shape}")
            store[name][...] = a

    def zero_grad(self):
        for k, p in self.params.items():
            self.grads[k] = np.zeros_like(p)

    def _take_cache(self):
        if self._cache is None:
            raise MissingCacheError(f"{self.kind}: backward called without a cached forward pass")
        cache, self._cache = self._cache, None
        return cache

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        self._cache = True
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self._take_cache()
        return grad


Identity = Layer


class Dense(Layer):
    kind = "Dense"

    def __init__(self, in_features: int, out_features: int, rng=None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.in_features, self.out_features = in_features, out_features
        self.params["W"] = glorot_uniform(rng, (in_features, out_features), in_features, out_features)
        self.params["b"] = np.zeros(out_features)
        self.zero_grad()

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"Dense expects (N, {self.in_features}), got {x.shape}")
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad):
        x = self._take_cache()
        self.grads["W"] += x.T @ grad
        self.grads["b"] += grad.sum(0)
        return grad @ self.params["W"].T


class Conv1d(Layer):
    """Cross-correlation with weight ``(out_channels, in_channels, kernel)``."""

    kind = "Conv1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, stride: int = 1,
                 padding: int = 0, rng=None):
        super().__init__()
        if kernel_size < 1 or stride < 1 or padding < 0:
            raise ValueError("kernel_size and stride must be positive, padding non-negative")
        rng = rng or np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride, self.padding = kernel_size, stride, padding
        self.params["W"] = glorot_uniform(rng, (out_channels, in_channels, kernel_size),
                                          in_channels * kernel_size, out_channels * kernel_size)
        self.params["b"] = np.zeros(out_channels)
        self.zero_grad()

    def output_length(self, length: int) -> int:
        return (length + 2 * self.padding - self.kernel_size) // self.stride + 1

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"Conv1d expects (N, {self.in_channels}, L), got {x.shape}")
        length = x.shape[2]
        if self.output_length(length) < 1:
            raise ShapeError(f"Conv1d: input length {length} shorter than kernel {self.kernel_size}")
        xp = np.pad(x, ((0, 0), (0, 0), (self.padding, self.padding))) if self.padding else x
        cols = np.lib.stride_tricks.sliding_window_view(xp, self.kernel_size, axis=2)
        cols = cols[:, :, ::self.stride, :]  # (N, C, Lout, K)
        self._cache = (cols, xp.shape, length)
        out = np.einsum("nclk,ock->nol", cols, self.params["W"], optimize=True)
        return out + self.params["b"][None, :, None]

    def backward(self, grad):
        cols, xp_shape, length = self._take_cache()
        W = self.params["W"]
        self.grads["W"] += np.einsum("nclk,nol->ock", cols, grad, optimize=True)
        self.grads["b"] += grad.sum((0, 2))
        dcols = np.einsum("nol,ock->nclk", grad, W, optimize=True)
        dxp = np.zeros(xp_shape)
        lout = grad.shape[2]
        span = self.stride * (lout - 1) + 1
        for k in range(self.kernel_size):
            dxp[:, :, k:k + span:self.stride] += dcols[..., k]
        if self.padding:
            return dxp[:, :, self.padding:self.padding + length]
        return dxp


class ConvTranspose1d(Layer):
    """Transposed convolution, weight ``(in_channels, out_channels, kernel)``.

    Output length is ``(L - 1) * stride + kernel`` (no padding, no output padding).
    """

    kind = "ConvTranspose1d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, stride: int = 1, rng=None):
        super().__init__()
        if kernel_size < 1 or stride < 1:
            raise ValueError("kernel_size and stride must be positive")
        rng = rng or np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride = kernel_size, stride
        self.params["W"] = glorot_uniform(rng, (in_channels, out_channels, kernel_size),
                                          in_channels * kernel_size, out_channels * kernel_size)
        self.params["b"] = np.zeros(out_channels)
        self.zero_grad()

    def output_length(self, length: int) -> int:
        return (length - 1) * self.stride + self.kernel_size

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"ConvTranspose1d expects (N, {self.in_channels}, L), got {x.shape}")
        n, _, length = x.shape
        self._cache = x
        out = np.zeros((n, self.out_channels, self.output_length(length)))
        span = self.stride * (length - 1) + 1
        W = self.params["W"]
        for k in range(self.kernel_size):
            out[:, :, k:k + span:self.stride] += np.einsum("ncl,co->nol", x, W[:, :, k], optimize=True)
        return out + self.params["b"][None, :, None]

    def backward(self, grad):
        x = self._take_cache()
        length = x.shape[2]
        span = self.stride * (length - 1) + 1
        W = self.params["W"]
        dx = np.zeros_like(x)
        for k in range(self.kernel_size):
            g = grad[:, :, k:k + span:self.stride]  # (N, O, L)
            self.grads["W"][:, :, k] += np.einsum("ncl,nol->co", x, g, optimize=True)
            dx += np.einsum("nol,co->ncl", g, W[:, :, k], optimize=True)
        self.grads["b"] += grad.sum((0, 2))
        return dx


class BatchNorm(Layer):
    """Batch normalization over the batch axis (and the length axis for ``(N, C, L)``).

    Training uses batch statistics and updates exponential running averages;
    inference uses the running averages.
    """

    kind = "BatchNorm"

    def __init__(self, num_features: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.num_features, self.eps, self.momentum = num_features, eps, momentum
        self.params["gamma"] = np.ones(num_features)
        self.params["beta"] = np.zeros(num_features)
        self.buffers["running_mean"] = np.zeros(num_features)
        self.buffers["running_var"] = np.ones(num_features)
        self.zero_grad()

    def _axes(self, x):
        if x.ndim == 2 and x.shape[1] == self.num_features:
            return (0,), (1, -1)
        if x.ndim == 3 and x.shape[1] == self.num_features:
            return (0, 2), (1, -1, 1)
        raise ShapeError(f"BatchNorm({self.num_features}) cannot normalize shape {x.shape}")

    def forward(self, x, training=False):
        axes, bshape = self._axes(x)
        gamma = self.params["gamma"].reshape(bshape)
        beta = self.params["beta"].reshape(bshape)
        if training:
            mean = x.mean(axes)
            var = x.var(axes)
            count = x.size // self.num_features
            m = self.momentum
            self.buffers["running_mean"][...] = (1 - m) * self.buffers["running_mean"] + m * mean
            unbiased = var * count / max(count - 1, 1)
            self.buffers["running_var"][...] = (1 - m) * self.buffers["running_var"] + m * unbiased
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(bshape)) * inv.reshape(bshape)
        self._cache = (xhat, inv, axes, bshape, training)
        return gamma * xhat + beta

    def backward(self, grad):
        xhat, inv, axes, bshape, training = self._take_cache()
        self.grads["gamma"] += (grad * xhat).sum(axes)
        self.grads["beta"] += grad.sum(axes)
        gx = grad * self.params["gamma"].reshape(bshape)
        if not training:
            return gx * inv.reshape(bshape)
        mean_g = gx.mean(axes, keepdims=True)
        mean_gx = (gx * xhat).mean(axes, keepdims=True)
        return (gx - mean_g - xhat * mean_gx) * inv.reshape(bshape)


class LeakyReLU(Layer):
    kind = "LeakyReLU"

    def __init__(self, negative_slope: float = 0.2):
        super().__init__()
        if not 0 < negative_slope < 1:
            raise ValueError("negative_slope must lie in (0, 1)")
        self.negative_slope = negative_slope

    def forward(self, x, training=False):
        mask = x > 0
        self._cache = mask
        return np.where(mask, x, self.negative_slope * x)

    def backward(self, grad):
        mask = self._take_cache()
        return np.where(mask, grad, self.negative_slope * grad)


class Sigmoid(Layer):
    kind = "Sigmoid"

    def forward(self, x, training=False):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._cache = out
        return out

    def backward(self, grad):
        out = self._take_cache()
        return grad * out * (1.0 - out)


class Reshape(Layer):
    """Reshape the non-batch axes to ``shape``."""

    kind = "Reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def forward(self, x, training=False):
        if int(np.prod(x.shape[1:])) != int(np.prod(self.shape)):
            raise ShapeError(f"Reshape cannot map {x.shape[1:]} to {self.shape}")
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, grad):
        shape = self._take_cache()
        return grad.reshape(shape)


class Flatten(Layer):
    kind = "Flatten"

    def forward(self, x, training=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        shape = self._take_cache()
        return grad.reshape(shape)


_BUILDERS = {
    "Dense": lambda o, rng: Dense(o["in_features"], o["out_features"], rng=rng),
    "Conv1d": lambda o, rng: Conv1d(o["in_channels"], o["out_channels"], o["kernel_size"],
                                    o.get("stride", 1), o.get("padding", 0), rng=rng),
    "ConvTranspose1d": lambda o, rng: ConvTranspose1d(o["in_channels"], o["out_channels"],
                                                      o["kernel_size"], o.get("stride", 1), rng=rng),
    "BatchNorm": lambda o, rng: BatchNorm(o["num_features"], o.get("eps", 1e-5), o.get("momentum", 0.1)),
    "LeakyReLU": lambda o, rng: LeakyReLU(o.get("negative_slope", 0.2)),
    "Sigmoid": lambda o, rng: Sigmoid(),
    "Reshape": lambda o, rng: Reshape(o["shape"]),
    "Flatten": lambda o, rng: Flatten(),
    "Identity": lambda o, rng: Identity(),
}


def build_layer(spec: LayerSpec, rng: np.random.Generator | None = None) -> Layer:
    return _BUILDERS[spec.kind](spec.options, rng)


class Sequential:
    """An ordered chain of layers."""

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    @classmethod
    def from_specs(cls, specs: list[LayerSpec], rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        return cls([build_layer(s, rng) for s in specs])

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        for i, layer in enumerate(self.layers):
            try:
                x = layer.forward(x, training)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
        return x

    __call__ = forward

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params.values()]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[k] for layer in self.layers for k in layer.params]
