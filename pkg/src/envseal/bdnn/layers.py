"""Network layers with from-scratch forward and backward passes.

Parameters keep whatever dtype they were constructed with (float32 for
serialized models, float64 in gradient tests); all arithmetic runs in
float64. ``backward`` consumes the upstream gradient, stores parameter
gradients in ``grads`` (float64), and returns the gradient with respect to
the layer input.
"""

from __future__ import annotations

import numpy as np

from ..core import ValidationError
from . import kernels

__all__ = ["Layer", "Conv", "Relu", "Pool", "Affine", "Dropout", "Sigmoid", "Softmax"]


def _f64(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # branch on sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Layer:
    """Base layer: no parameters, no state."""

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, *, train: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv(Layer):
    """2-D convolution via im2col and one matrix product."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, stride: int = 1, pad: int = 1):
        super().__init__()
        if weight.ndim != 4 or bias.shape != (weight.shape[0],):
            raise ValidationError("conv weight must be (out, in, kh, kw) with matching bias")
        self.params = {"w": weight, "b": bias}
        self.stride = stride
        self.pad = pad

    def forward(self, x, *, train=False, rng=None):
        o, c, kh, kw = self.params["w"].shape
        n, _, h, w = x.shape
        if x.shape[1] != c:
            raise ValidationError(f"conv expects {c} input channels, got {x.shape[1]}")
        cols = kernels.im2col(_f64(x), kh, kw, self.stride, self.pad)
        w2 = _f64(self.params["w"]).reshape(o, c * kh * kw)
        out = np.matmul(w2, cols) + _f64(self.params["b"])[:, None]
        oh = (h + 2 * self.pad - kh) // self.stride + 1
        ow = (w + 2 * self.pad - kw) // self.stride + 1
        self._cache = (cols, w2, x.shape)
        return out.reshape(n, o, oh, ow)

    def backward(self, dout):
        cols, w2, x_shape = self._cache
        n, c, h, w = x_shape
        o, _, kh, kw = self.params["w"].shape
        d2 = _f64(dout).reshape(n, o, -1)
        self.grads["w"] = np.einsum("nol,nkl->ok", d2, cols).reshape(o, c, kh, kw)
        self.grads["b"] = d2.sum(axis=(0, 2))
        dcols = np.matmul(w2.T, d2)
        return kernels.col2im(dcols, c, h, w, kh, kw, self.stride, self.pad)


class Relu(Layer):
    def forward(self, x, *, train=False, rng=None):
        out = np.maximum(_f64(x), 0.0)
        self._mask = out > 0
        return out

    def backward(self, dout):
        return dout * self._mask


class Pool(Layer):
    """2x2 max pooling, stride 2; input height/width must be even."""

    def forward(self, x, *, train=False, rng=None):
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ValidationError("pool input height/width must be even")
        out, self._argmax = kernels.maxpool2x2(_f64(x))
        return out

    def backward(self, dout):
        return kernels.maxpool2x2_backward(_f64(dout), self._argmax)


class Affine(Layer):
    """Fully-connected layer; flattens any input to (batch, features)."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        super().__init__()
        if weight.ndim != 2 or bias.shape != (weight.shape[1],):
            raise ValidationError("affine weight must be (n_in, n_out) with matching bias")
        self.params = {"w": weight, "b": bias}

    @property
    def n_out(self) -> int:
        return self.params["w"].shape[1]

    def forward(self, x, *, train=False, rng=None):
        self._in_shape = x.shape
        x2 = _f64(x).reshape(x.shape[0], -1)
        if x2.shape[1] != self.params["w"].shape[0]:
            raise ValidationError(
                f"affine expects {self.params['w'].shape[0]} features, got {x2.shape[1]}"
            )
        self._x2 = x2
        return x2 @ _f64(self.params["w"]) + _f64(self.params["b"])

    def backward(self, dout):
        self.grads["w"] = self._x2.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return (dout @ _f64(self.params["w"]).T).reshape(self._in_shape)


class Dropout(Layer):
    """Inverted dropout: active only in training, identity at inference."""

    def __init__(self, rate: float):
        super().__init__()
        if not 0 <= rate < 1:
            raise ValidationError(f"dropout rate {rate} must lie in [0, 1)")
        self.rate = rate

    def forward(self, x, *, train=False, rng=None):
        if not train or self.rate == 0:
            self._mask = None
            return _f64(x)
        if rng is None:
            raise ValidationError("training-mode dropout needs an explicit rng")
        self._mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return _f64(x) * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask


class Sigmoid(Layer):
    def forward(self, x, *, train=False, rng=None):
        self._out = _sigmoid(_f64(x))
        return self._out

    def backward(self, dout):
        return dout * self._out * (1.0 - self._out)


class Softmax(Layer):
    """Row-wise softmax; the general backward is the full Jacobian product."""

    def forward(self, x, *, train=False, rng=None):
        shifted = _f64(x) - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        self._out = e / e.sum(axis=1, keepdims=True)
        return self._out

    def backward(self, dout):
        s = self._out
        return (dout - (dout * s).sum(axis=1, keepdims=True)) * s
