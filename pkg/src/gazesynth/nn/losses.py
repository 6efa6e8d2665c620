from __future__ import annotations

import numpy as np

BCE_CLAMP = 1e-7


def bce_loss(pred: np.ndarray, label) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. ``pred``.

    Predictions are clamped to ``[1e-7, 1 - 1e-7]`` before taking logs.
    """
    pred = np.asarray(pred, dtype=np.float64)
    y = np.broadcast_to(np.asarray(label, dtype=np.float64), pred.shape)
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loss = -np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    grad = (-(y / p) + (1.0 - y) / (1.0 - p)) / pred.size
    return float(loss), grad


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def mae_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size
