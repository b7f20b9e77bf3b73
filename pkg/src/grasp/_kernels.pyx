# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels; see _kernels_py for the reference semantics.

Loops are ordered so the innermost one walks contiguous pixels while each
output pixel still accumulates its taps in the reference order.
"""
import numpy as np

NAME = "cython"


def correlate_depthwise(const double[:, :, ::1] x, const double[:, ::1] k):
    cdef Py_ssize_t c = x.shape[0], hp = x.shape[1], wp = x.shape[2]
    cdef Py_ssize_t kh = k.shape[0], kw = k.shape[1]
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} larger than input {hp}x{wp}")
    cdef Py_ssize_t h = hp - kh + 1, w = wp - kw + 1
    out_arr = np.zeros((c, h, w))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ch, y, xx, dy, dx
    cdef double kv
    with nogil:
        for ch in range(c):
            for dy in range(kh):
                for dx in range(kw):
                    kv = k[dy, dx]
                    for y in range(h):
                        for xx in range(w):
                            out[ch, y, xx] += kv * x[ch, y + dy, xx + dx]
    return out_arr


def conv_multi(const double[:, :, ::1] x, const double[:, :, :, ::1] w):
    cdef Py_ssize_t ci = x.shape[0], hp = x.shape[1], wp = x.shape[2]
    cdef Py_ssize_t co = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    if w.shape[1] != ci:
        raise ValueError(f"channel mismatch {ci} vs {w.shape[1]}")
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} larger than input {hp}x{wp}")
    cdef Py_ssize_t h = hp - kh + 1, ww = wp - kw + 1
    out_arr = np.zeros((co, h, ww))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t o, i, y, xx, dy, dx
    cdef double wv
    with nogil:
        for o in range(co):
            for i in range(ci):
                for dy in range(kh):
                    for dx in range(kw):
                        wv = w[o, i, dy, dx]
                        for y in range(h):
                            for xx in range(ww):
                                out[o, y, xx] += wv * x[i, y + dy, xx + dx]
    return out_arr
