# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels; must stay bit-identical to kernels.reference."""

import numpy as np

cimport numpy as cnp
from libc.string cimport memcpy

cnp.import_array()

BACKEND = "cython"


def im2col(object x_in, int kh, int kw, int stride, int pad):
    cdef cnp.ndarray[cnp.float64_t, ndim=4, mode="c"] x = np.ascontiguousarray(
        x_in, dtype=np.float64
    )
    cdef Py_ssize_t n_batch = x.shape[0], c_in = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((n_batch, c_in * kh * kw, oh * ow), dtype=np.float64)
    cdef double[:, :, ::1] cols = out
    cdef double[:, :, :, ::1] xv = x
    cdef Py_ssize_t n, c, ki, kj, i, j, ih, iw, row, j_lo, j_hi, base
    for n in range(n_batch):
        for c in range(c_in):
            for ki in range(kh):
                for kj in range(kw):
                    row = (c * kh + ki) * kw + kj
                    for i in range(oh):
                        ih = i * stride + ki - pad
                        if ih < 0 or ih >= h:
                            continue
                        if stride == 1:
                            # contiguous run: one memcpy per output row
                            j_lo = pad - kj if pad - kj > 0 else 0
                            j_hi = w + pad - kj if w + pad - kj < ow else ow
                            if j_lo < j_hi:
                                base = i * ow
                                memcpy(
                                    &cols[n, row, base + j_lo],
                                    &xv[n, c, ih, j_lo + kj - pad],
                                    (j_hi - j_lo) * sizeof(double),
                                )
                        else:
                            for j in range(ow):
                                iw = j * stride + kj - pad
                                if 0 <= iw < w:
                                    cols[n, row, i * ow + j] = xv[n, c, ih, iw]
    return out


def col2im(object cols_in, int c_in, int h, int w, int kh, int kw, int stride, int pad):
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] cols = np.ascontiguousarray(
        cols_in, dtype=np.float64
    )
    cdef Py_ssize_t n_batch = cols.shape[0]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((n_batch, c_in, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] xv = out
    cdef double[:, :, ::1] cv = cols
    cdef Py_ssize_t n, c, ki, kj, i, j, ih, iw, row
    for n in range(n_batch):
        for c in range(c_in):
            for ki in range(kh):
                for kj in range(kw):
                    row = (c * kh + ki) * kw + kj
                    for i in range(oh):
                        ih = i * stride + ki - pad
                        if ih < 0 or ih >= h:
                            continue
                        for j in range(ow):
                            iw = j * stride + kj - pad
                            if 0 <= iw < w:
                                xv[n, c, ih, iw] += cv[n, row, i * ow + j]
    return out


def maxpool2x2(object x_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=4, mode="c"] x = np.ascontiguousarray(
        x_in, dtype=np.float64
    )
    cdef Py_ssize_t n_batch = x.shape[0], c_in = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    out = np.empty((n_batch, c_in, oh, ow), dtype=np.float64)
    amax = np.empty((n_batch, c_in, oh, ow), dtype=np.int64)
    cdef double[:, :, :, ::1] ov = out
    cdef long long[:, :, :, ::1] av = amax
    cdef double[:, :, :, ::1] xv = x
    cdef Py_ssize_t n, c, i, j, k, di, dj, best_k
    cdef double v, best
    for n in range(n_batch):
        for c in range(c_in):
            for i in range(oh):
                for j in range(ow):
                    best = xv[n, c, 2 * i, 2 * j]
                    best_k = 0
                    for k in range(1, 4):
                        di = k >> 1
                        dj = k & 1
                        v = xv[n, c, 2 * i + di, 2 * j + dj]
                        if v > best:
                            best = v
                            best_k = k
                    ov[n, c, i, j] = best
                    av[n, c, i, j] = best_k
    return out, amax


def maxpool2x2_backward(object dout_in, object argmax_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=4, mode="c"] dout = np.ascontiguousarray(
        dout_in, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.int64_t, ndim=4, mode="c"] amax = np.ascontiguousarray(
        argmax_in, dtype=np.int64
    )
    cdef Py_ssize_t n_batch = dout.shape[0], c_in = dout.shape[1]
    cdef Py_ssize_t oh = dout.shape[2], ow = dout.shape[3]
    out = np.zeros((n_batch, c_in, oh * 2, ow * 2), dtype=np.float64)
    cdef double[:, :, :, ::1] dxv = out
    cdef double[:, :, :, ::1] dov = dout
    cdef long long[:, :, :, ::1] av = amax
    cdef Py_ssize_t n, c, i, j, k
    for n in range(n_batch):
        for c in range(c_in):
            for i in range(oh):
                for j in range(ow):
                    k = av[n, c, i, j]
                    dxv[n, c, 2 * i + (k >> 1), 2 * j + (k & 1)] = dov[n, c, i, j]
    return out
