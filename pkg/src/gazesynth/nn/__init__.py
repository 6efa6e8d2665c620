from .layers import (
    KIND_IDS,
    BatchNorm,
    Conv1d,
    ConvTranspose1d,
    Dense,
    Flatten,
    Identity,
    Layer,
    LayerSpec,
    LeakyReLU,
    MissingCacheError,
    Reshape,
    Sequential,
    ShapeError,
    Sigmoid,
    build_layer,
)
from .losses import bce_loss, mae_loss, mse_loss
from .optim import Adam, NonFiniteGradientError, adam_step
from .weights import WeightFormatError, load_weights, save_weights

__all__ = [
    "KIND_IDS", "BatchNorm", "Conv1d", "ConvTranspose1d", "Dense", "Flatten", "Identity", "Layer",
    "LayerSpec", "LeakyReLU", "MissingCacheError", "Reshape", "Sequential", "ShapeError", "Sigmoid",
    "build_layer", "bce_loss", "mae_loss", "mse_loss", "Adam", "NonFiniteGradientError",
    "adam_step", "WeightFormatError", "load_weights", "save_weights",
]
