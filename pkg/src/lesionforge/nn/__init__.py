"""Minimal dense/convolutional network engine with explicit backprop."""
from .layers import (
    BatchNorm2d,
    Conv2d,
    ELU,
    Flatten,
    Layer,
    Linear,
    ReLU,
    Sequential,
    ShapeError,
    conv_output_extent,
)
from .losses import mse_loss, softmax_cross_entropy
from .optim import Adam, SGDMomentum, make_optimizer
from .gradcheck import gradcheck
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "BatchNorm2d",
    "Conv2d",
    "ELU",
    "Flatten",
    "Layer",
    "Linear",
    "ReLU",
    "Sequential",
    "ShapeError",
    "conv_output_extent",
    "mse_loss",
    "softmax_cross_entropy",
    "Adam",
    "SGDMomentum",
    "make_optimizer",
    "gradcheck",
    "load_checkpoint",
    "save_checkpoint",
]
