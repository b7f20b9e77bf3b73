"""One-level orthonormal 2-D Haar transform and low-frequency reconstruction.

For each channel and each non-overlapping 2x2 block ``[a b; c d]``::

    ll = (a + b + c + d) / 2        hl = (a + b - c - d) / 2
    lh = (a - b + c - d) / 2        hh = (a - b - c + d) / 2

The first letter names the vertical filter and the second the horizontal
one. The transform is orthonormal, so synthesis is its transpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .image import ImageTensor, require_even


@dataclass(frozen=True)
class SubbandSet:
    ll: ImageTensor
    lh: ImageTensor
    hl: ImageTensor
    hh: ImageTensor
    source_dims: tuple[int, int]

    def __post_init__(self):
        shapes = {b.shape for b in (self.ll, self.lh, self.hl, self.hh)}
        if len(shapes) != 1:
            raise ShapeError(f"subbands disagree in shape: {sorted(shapes)}")
        h, w, _ = self.ll.shape
        if (2 * h, 2 * w) != tuple(self.source_dims):
            raise ShapeError(f"subbands {h}x{w} do not match source {self.source_dims}")


def haar_analysis(arr: np.ndarray):
    """Array-level forward transform of an (H, W, C) array."""
    a = arr[0::2, 0::2]
    b = arr[0::2, 1::2]
    c = arr[1::2, 0::2]
    d = arr[1::2, 1::2]
    ll = (a + b + c + d) / 2
    hl = (a + b - c - d) / 2
    lh = (a - b + c - d) / 2
    hh = (a - b - c + d) / 2
    return ll, lh, hl, hh


def haar_synthesis(ll, lh, hl, hh):
    h, w, c = ll.shape
    out = np.empty((2 * h, 2 * w, c))
    out[0::2, 0::2] = (ll + hl + lh + hh) / 2
    out[0::2, 1::2] = (ll + hl - lh - hh) / 2
    out[1::2, 0::2] = (ll - hl + lh - hh) / 2
    out[1::2, 1::2] = (ll - hl - lh + hh) / 2
    return out


def low_pass(arr: np.ndarray) -> np.ndarray:
    """Array-level ``low_freq_reconstruct``: synthesis of the ll band alone."""
    ll = haar_analysis(arr)[0]
    zero = np.zeros_like(ll)
    return haar_synthesis(ll, zero, zero, zero)


def dwt_haar(x: ImageTensor) -> SubbandSet:
    require_even(x)
    bands = [x.with_data(b) for b in haar_analysis(x.data)]
    return SubbandSet(*bands, source_dims=(x.height, x.width))


def idwt_haar(s: SubbandSet) -> ImageTensor:
    data = haar_synthesis(s.ll.data, s.lh.data, s.hl.data, s.hh.data)
    return s.ll.with_data(data)


def low_freq_reconstruct(x: ImageTensor) -> ImageTensor:
    """Image rebuilt from its approximation band only.

    This is an orthogonal projection: each 2x2 block is replaced by its mean.
    """
    require_even(x)
    return x.with_data(low_pass(x.data))
