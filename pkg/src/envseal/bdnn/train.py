"""Training and gradient verification for the trainable discriminator.

The loss is cross-entropy plus a binarization penalty
``lambda * mean(a * (1 - a))`` over the key-layer activations, which pushes
every activation toward 0 or 1 so that in-class inputs bucketize to one
stable key. Optimization is SGD with momentum; one seed determines weight
initialization, shuffling, and dropout masks, so runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import AttributeSample, EnvsealError, Label, ValidationError
from ..images import decode_image
from .model import BucketizerConfig, NetworkModel, build_default_model

__all__ = ["TrainConfig", "NonFiniteLossError", "train", "loss_and_grads", "gradient_check"]


class NonFiniteLossError(EnvsealError):
    """Training loss left the finite range; carries where it happened."""

    def __init__(self, epoch: int, batch: int, loss: float) -> None:
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}; "
            f"lower the learning rate or penalty weight"
        )
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 45
    batch_size: int = 16
    learning_rate: float = 0.05
    dropout_rate: float = 0.3
    seed: int = 0
    binarization_penalty: float = 0.15
    momentum: float = 0.9
    bucketizer_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be positive")
        if self.binarization_penalty < 0:
            raise ValidationError("binarization penalty weight must be >= 0")


def samples_to_arrays(
    samples: Sequence[AttributeSample], input_hw: tuple[int, int] = (32, 32)
) -> tuple[np.ndarray, np.ndarray]:
    """Decode labeled image samples into (x (N,1,H,W) in [0,1], y (N,))."""
    xs, ys = [], []
    for s in samples:
        if s.label is Label.UNLABELED:
            raise ValidationError(f"sample {s.source_id!r} is unlabeled")
        bmp = decode_image(s.data, s.source_id)
        if bmp.channels != 1 or (bmp.height, bmp.width) != input_hw:
            raise ValidationError(
                f"sample {s.source_id!r} is {bmp.height}x{bmp.width}x{bmp.channels}; "
                f"training needs {input_hw[0]}x{input_hw[1]} grayscale"
            )
        xs.append(np.frombuffer(bmp.pixels, dtype=np.uint8).reshape(1, *input_hw))
        ys.append(1 if s.label is Label.POSITIVE else 0)
    x = np.stack(xs).astype(np.float64) / 255.0
    return x, np.array(ys, dtype=np.int64)


def loss_and_grads(
    model: NetworkModel,
    x: np.ndarray,
    y: np.ndarray,
    lam: float,
    *,
    train: bool = True,
    rng=None,
    compute_grads: bool = True,
) -> float:
    """Forward (and optionally backward) pass; returns the scalar loss.

    Gradients land in each layer's ``grads``. The softmax/cross-entropy pair
    is backpropagated in fused form; the penalty gradient is injected at the
    key sigmoid's output.
    """
    n = x.shape[0]
    key_acts, probs = model.forward_batch(x, train=train, rng=rng)
    with np.errstate(divide="ignore"):  # log(0) -> inf is caught by the caller
        ce = -np.mean(np.log(probs[np.arange(n), y]))
    penalty = lam * np.mean(key_acts * (1.0 - key_acts))
    loss = float(ce + penalty)
    if not compute_grads:
        return loss

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    dx = (probs - onehot) / n  # fused softmax + cross-entropy gradient
    dpenalty = lam * (1.0 - 2.0 * key_acts) / key_acts.size
    for i in range(len(model.layers) - 2, -1, -1):
        if i == model.key_layer_index + 1:
            dx = dx + dpenalty
        dx = model.layers[i].backward(dx)
    return loss


def train(samples: Sequence[AttributeSample], cfg: TrainConfig) -> NetworkModel:
    """Train a fresh model on labeled image samples.

    Rejects single-class data; aborts on non-finite loss. The returned
    model's weights are float32 and fully determined by ``cfg.seed``.
    """
    x, y = samples_to_arrays(samples)
    if len(set(y.tolist())) < 2:
        raise ValidationError("training needs both positive and negative samples")

    rng = np.random.default_rng(cfg.seed)
    model = build_default_model(
        cfg.seed,
        cfg.dropout_rate,
        BucketizerConfig(cfg.bucketizer_threshold),
        rng=rng,
    )
    velocity: dict[tuple[int, str], np.ndarray] = {}
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            loss = loss_and_grads(
                model, x[idx], y[idx], cfg.binarization_penalty, train=True, rng=rng
            )
            if not np.isfinite(loss):
                raise NonFiniteLossError(epoch, bi, loss)
            if cfg.learning_rate == 0:
                continue
            for li, layer in enumerate(model.layers):
                for name, param in layer.params.items():
                    g = layer.grads[name]
                    v = velocity.setdefault((li, name), np.zeros(param.shape))
                    v *= cfg.momentum
                    v -= cfg.learning_rate * g
                    layer.params[name] = (param.astype(np.float64) + v).astype(param.dtype)
    return model


def gradient_check(
    model: NetworkModel,
    x: np.ndarray,
    y: np.ndarray,
    *,
    lam: float = 0.0,
    h: float = 1e-4,
    train: bool = False,
    rng_seed: int = 0,
) -> float:
    """Max relative error between backprop and central finite differences.

    Works on small models only (<= 10**4 parameters). The difference
    quotient divides by the actually realized parameter step, so float32
    parameter storage does not distort the check. Per tensor, the error is
    normalized by the larger gradient magnitude (floored at 1e-6 so an
    all-dead tensor cannot divide by zero).
    """
    if model.parameter_count() > 10_000:
        raise ValidationError("gradient check is limited to models with <= 10^4 parameters")

    def fresh_rng():
        return np.random.default_rng(rng_seed)  # same dropout mask every evaluation

    loss_and_grads(model, x, y, lam, train=train, rng=fresh_rng())
    analytic = {
        (li, name): layer.grads[name].copy()
        for li, layer in enumerate(model.layers)
        for name in layer.params
    }

    worst = 0.0
    for li, layer in enumerate(model.layers):
        for name, param in layer.params.items():
            flat = param.reshape(-1)
            numeric = np.zeros(flat.shape, dtype=np.float64)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = np.asarray(float(orig) + h, dtype=param.dtype)
                hi = float(flat[i])
                lp = loss_and_grads(
                    model, x, y, lam, train=train, rng=fresh_rng(), compute_grads=False
                )
                flat[i] = np.asarray(float(orig) - h, dtype=param.dtype)
                lo = float(flat[i])
                lm = loss_and_grads(
                    model, x, y, lam, train=train, rng=fresh_rng(), compute_grads=False
                )
                flat[i] = orig
                numeric[i] = (lp - lm) / (hi - lo)
            a = analytic[(li, name)].reshape(-1)
            scale = max(np.abs(a).max(), np.abs(numeric).max(), 1e-6)
            worst = max(worst, float(np.abs(a - numeric).max() / scale))
    return worst
