"""Trainable binary-classification discriminator with a key-bearing layer."""

from .model import (
    BucketizerConfig,
    NetworkModel,
    bucketize,
    build_default_model,
    derive_key_bdnn,
    forward,
)
from .modelio import ModelFileError, load_model, save_model
from .train import NonFiniteLossError, TrainConfig, gradient_check, train

__all__ = [
    "BucketizerConfig",
    "NetworkModel",
    "bucketize",
    "build_default_model",
    "derive_key_bdnn",
    "forward",
    "ModelFileError",
    "load_model",
    "save_model",
    "NonFiniteLossError",
    "TrainConfig",
    "gradient_check",
    "train",
]
