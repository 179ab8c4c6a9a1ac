"""The trainable discriminator model and its key-emission path.

A model is a fixed layer stack whose 128-unit fully-connected layer (the
key layer, always followed by a sigmoid) is thresholded into a 128-bit key.
Key emission is total: every well-shaped input yields a key; inputs off the
target class simply yield a key that fails the downstream key check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Bitmap, DiscriminatorId, KeyMaterial, ValidationError
from .layers import Affine, Conv, Dropout, Layer, Pool, Relu, Sigmoid, Softmax

__all__ = [
    "BucketizerConfig",
    "NetworkModel",
    "build_default_model",
    "forward",
    "bucketize",
    "derive_key_bdnn",
]

KEY_UNITS = 128
INPUT_HW = (32, 32)


@dataclass(frozen=True)
class BucketizerConfig:
    """Threshold turning key-layer activations into bits; fixed at train time."""

    threshold: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.threshold < 1:
            raise ValidationError(f"bucketizer threshold {self.threshold} must lie in (0, 1)")


class NetworkModel:
    """Layer stack plus the index of the key layer and its bucketizer."""

    def __init__(
        self,
        layers: list[Layer],
        key_layer_index: int,
        bucketizer: BucketizerConfig = BucketizerConfig(),
        input_hw: tuple[int, int] = INPUT_HW,
    ) -> None:
        key = layers[key_layer_index] if 0 <= key_layer_index < len(layers) else None
        if not (isinstance(key, Affine) and key.n_out == KEY_UNITS):
            raise ValidationError("key layer must be the Affine layer with 128 units")
        if key_layer_index + 1 >= len(layers) or not isinstance(
            layers[key_layer_index + 1], Sigmoid
        ):
            raise ValidationError("the key layer must be followed by a Sigmoid")
        if not isinstance(layers[-1], Softmax):
            raise ValidationError("the final layer must be a Softmax")
        others = [
            l for i, l in enumerate(layers)
            if isinstance(l, Affine) and l.n_out == KEY_UNITS and i != key_layer_index
        ]
        if others:
            raise ValidationError("exactly one Affine layer may have 128 units")
        self.layers = layers
        self.key_layer_index = key_layer_index
        self.bucketizer = bucketizer
        self.input_hw = input_hw

    def parameter_count(self) -> int:
        return sum(p.size for l in self.layers for p in l.params.values())

    def forward_batch(
        self, x: np.ndarray, *, train: bool = False, rng=None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Run the stack; returns (key activations (N,128), class probs (N,2))."""
        key_acts = None
        for i, layer in enumerate(self.layers):
            x = layer.forward(x, train=train, rng=rng)
            if i == self.key_layer_index + 1:
                key_acts = x
        return key_acts, x


def build_default_model(
    seed: int,
    dropout_rate: float = 0.3,
    bucketizer: BucketizerConfig = BucketizerConfig(),
    rng: np.random.Generator | None = None,
) -> NetworkModel:
    """The stock architecture on 32x32 grayscale inputs, He-initialized.

    Conv(8,3x3)/Relu/Pool -> Conv(16,3x3)/Relu/Pool -> Affine128/Sigmoid ->
    Dropout -> Affine2/Softmax. Weights are float32; the given seed fully
    determines them.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)

    def he(shape, fan_in):
        return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(np.float32)

    layers: list[Layer] = [
        Conv(he((8, 1, 3, 3), 9), np.zeros(8, dtype=np.float32)),
        Relu(),
        Pool(),
        Conv(he((16, 8, 3, 3), 8 * 9), np.zeros(16, dtype=np.float32)),
        Relu(),
        Pool(),
        Affine(he((16 * 8 * 8, KEY_UNITS), 16 * 8 * 8), np.zeros(KEY_UNITS, dtype=np.float32)),
        Sigmoid(),
        Dropout(dropout_rate),
        Affine(he((KEY_UNITS, 2), KEY_UNITS), np.zeros(2, dtype=np.float32)),
        Softmax(),
    ]
    return NetworkModel(layers, key_layer_index=6, bucketizer=bucketizer)


def _image_to_batch(model: NetworkModel, image: Bitmap) -> np.ndarray:
    if image.channels != 1 or (image.height, image.width) != model.input_hw:
        raise ValidationError(
            f"model expects {model.input_hw[0]}x{model.input_hw[1]} grayscale input, "
            f"got {image.height}x{image.width}x{image.channels}"
        )
    px = np.frombuffer(image.pixels, dtype=np.uint8).astype(np.float64) / 255.0
    return px.reshape(1, 1, *model.input_hw)


def forward(model: NetworkModel, image: Bitmap) -> tuple[np.ndarray, np.ndarray]:
    """Inference on one image: (128 key activations, 2 class probabilities).

    Dropout is disabled; the pass is pure and deterministic.
    """
    key_acts, probs = model.forward_batch(_image_to_batch(model, image), train=False)
    return key_acts[0], probs[0]


def bucketize(activations: np.ndarray, cfg: BucketizerConfig) -> KeyMaterial:
    """Threshold 128 activations in [0,1] into a 128-bit key; bit = a >= t."""
    a = np.asarray(activations, dtype=np.float64).ravel()
    if a.shape != (KEY_UNITS,):
        raise ValidationError(f"bucketizer needs exactly {KEY_UNITS} activations, got {a.size}")
    if a.min() < 0 or a.max() > 1:
        raise ValidationError("activations must lie in [0, 1]")
    value = 0
    for v in a:
        value = (value << 1) | (1 if v >= cfg.threshold else 0)
    return KeyMaterial.from_int(value, KEY_UNITS, DiscriminatorId.BDNN)


def derive_key_bdnn(model: NetworkModel, image: Bitmap) -> KeyMaterial:
    """Bucketized key-layer activations for any well-shaped input."""
    key_acts, _ = forward(model, image)
    return bucketize(key_acts, model.bucketizer)
