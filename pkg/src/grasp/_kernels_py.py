"""Pure-numpy reference kernels.

Accumulation order is fixed (taps in row-major order, input channels
outermost) and matches ``_kernels.pyx`` operation for operation, so both
backends produce bit-identical results.
"""
import numpy as np

NAME = "python"


def correlate_depthwise(x, k):
    """Valid 2-D cross-correlation of every channel of ``x`` (C, Hp, Wp)
    with the single kernel ``k`` (kh, kw)."""
    c, hp, wp = x.shape
    kh, kw = k.shape
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} larger than input {hp}x{wp}")
    h, w = hp - kh + 1, wp - kw + 1
    out = np.zeros((c, h, w))
    for dy in range(kh):
        for dx in range(kw):
            out += k[dy, dx] * x[:, dy:dy + h, dx:dx + w]
    return out


def conv_multi(x, w):
    """Valid multi-channel correlation: ``x`` (Ci, Hp, Wp), ``w`` (Co, Ci, kh, kw)."""
    ci, hp, wp = x.shape
    co, ci2, kh, kw = w.shape
    if ci != ci2:
        raise ValueError(f"channel mismatch {ci} vs {ci2}")
    if kh > hp or kw > wp:
        raise ValueError(f"kernel {kh}x{kw} larger than input {hp}x{wp}")
    h, ww = hp - kh + 1, wp - kw + 1
    out = np.zeros((co, h, ww))
    for o in range(co):
        acc = out[o]
        for i in range(ci):
            for dy in range(kh):
                for dx in range(kw):
                    acc += w[o, i, dy, dx] * x[i, dy:dy + h, dx:dx + ww]
    return out
