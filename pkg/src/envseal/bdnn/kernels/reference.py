"""Numpy reference kernels; the semantics the Cython backend must match.

Column layout: row index (c*kh + ki)*kw + kj, column index oh*OW + ow.
col2im accumulates kernel offsets in (ki, kj) ascending order per target
cell, and pooling resolves ties toward the first window element
(k = di*2 + dj); the compiled backend mirrors both so results are
bit-identical.
"""

from __future__ import annotations

import numpy as np

BACKEND = "reference"


def _out_size(h: int, w: int, kh: int, kw: int, stride: int, pad: int) -> tuple[int, int]:
    return (h + 2 * pad - kh) // stride + 1, (w + 2 * pad - kw) // stride + 1


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x.shape
    oh, ow = _out_size(h, w, kh, kw, stride, pad)
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for ki in range(kh):
        for kj in range(kw):
            cols[:, :, ki, kj] = padded[
                :, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride
            ]
    return cols.reshape(n, c * kh * kw, oh * ow)


def col2im(
    cols: np.ndarray,
    c: int,
    h: int,
    w: int,
    kh: int,
    kw: int,
    stride: int,
    pad: int,
) -> np.ndarray:
    n = cols.shape[0]
    oh, ow = _out_size(h, w, kh, kw, stride, pad)
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ki in range(kh):
        for kj in range(kw):
            padded[
                :, :, ki : ki + stride * oh : stride, kj : kj + stride * ow : stride
            ] += cols6[:, :, ki, kj]
    return padded[:, :, pad : pad + h, pad : pad + w].copy()


def maxpool2x2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, c, h, w = x.shape
    oh, ow = h // 2, w // 2
    win = (
        x.reshape(n, c, oh, 2, ow, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, oh, ow, 4)
    )
    argmax = win.argmax(axis=-1)
    out = np.take_along_axis(win, argmax[..., None], axis=-1)[..., 0]
    return out, argmax.astype(np.int64)


def maxpool2x2_backward(dout: np.ndarray, argmax: np.ndarray) -> np.ndarray:
    n, c, oh, ow = dout.shape
    dwin = np.zeros((n, c, oh, ow, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, argmax[..., None], dout[..., None], axis=-1)
    return (
        dwin.reshape(n, c, oh, ow, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, oh * 2, ow * 2)
        .copy()
    )
