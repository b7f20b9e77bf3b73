"""Image tensors, norms and the epsilon-ball clipping primitives.

Every image, perturbation and gradient in grasp is an :class:`ImageTensor`:
an immutable ``(height, width, channels)`` float64 array tagged with the
closed pixel interval it is meant to live in.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ShapeError

DEFAULT_RANGE = (0.0, 1.0)


class NormKind(enum.Enum):
    L1_SUM = "l1_sum"
    L2_MEAN = "l2_mean"
    LINF = "linf"


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """Read-only H x W x C image with a declared pixel range."""

    data: np.ndarray
    pixel_range: tuple[float, float] = DEFAULT_RANGE

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ShapeError(f"expected an H x W x C array, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ShapeError(f"channels must be 1 or 3, got {arr.shape[2]}")
        lo, hi = (float(v) for v in self.pixel_range)
        if not hi > lo:
            raise InvalidInput(f"empty pixel range {self.pixel_range}")
        # own a private, contiguous, frozen copy so callers cannot mutate us
        arr = np.array(arr, dtype=np.float64, order="C", copy=True)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "pixel_range", (lo, hi))

    @classmethod
    def zeros_like(cls, other: ImageTensor) -> ImageTensor:
        return cls(np.zeros(other.shape), other.pixel_range)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def range_width(self) -> float:
        return self.pixel_range[1] - self.pixel_range[0]

    def with_data(self, data) -> ImageTensor:
        """New tensor with ``data`` and this tensor's pixel range."""
        return ImageTensor(data, self.pixel_range)

    def range_clip(self) -> ImageTensor:
        return self.with_data(np.clip(self.data, *self.pixel_range))

    def __add__(self, other):
        return elementwise(self, other, "add")

    def __sub__(self, other):
        return elementwise(self, other, "sub")

    def __mul__(self, k):
        return elementwise(self, k, "scale")

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_data(-self.data)

    def __repr__(self):
        return f"ImageTensor(shape={self.shape}, pixel_range={self.pixel_range})"


def _check_same_shape(a: ImageTensor, b: ImageTensor):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def norm(x: ImageTensor, kind: NormKind = NormKind.L1_SUM) -> float:
    """Norm of the flattened tensor.

    ``L1_SUM`` is the plain sum of magnitudes, ``L2_MEAN`` the mean of squares
    (no square root) and ``LINF`` the largest magnitude.
    """
    if x.size == 0:
        raise InvalidInput("norm of an empty tensor")
    v = x.data
    if kind is NormKind.L1_SUM:
        return float(np.abs(v).sum())
    if kind is NormKind.L2_MEAN:
        return float(np.mean(v * v))
    if kind is NormKind.LINF:
        return float(np.abs(v).max())
    raise InvalidInput(f"unknown norm kind {kind!r}")


def dot(a: ImageTensor, b: ImageTensor) -> float:
    _check_same_shape(a, b)
    return float(np.dot(a.data.ravel(), b.data.ravel()))


def elementwise(a: ImageTensor, b, op: str):
    """Apply ``add``, ``sub``, ``scale`` (b is a scalar) or ``dot``.

    The result keeps ``a``'s pixel range; ``dot`` returns a float.
    """
    if op == "scale":
        return a.with_data(a.data * float(b))
    if not isinstance(b, ImageTensor):
        raise InvalidInput(f"op {op!r} needs two tensors")
    _check_same_shape(a, b)
    if op == "add":
        return a.with_data(a.data + b.data)
    if op == "sub":
        return a.with_data(a.data - b.data)
    if op == "dot":
        return dot(a, b)
    raise InvalidInput(f"unknown elementwise op {op!r}")


def clip_to_ball(candidate: ImageTensor, anchor: ImageTensor, epsilon: float) -> ImageTensor:
    """Project ``candidate`` onto the L-inf ball of radius ``epsilon`` around
    ``anchor``, then into the anchor's pixel range."""
    _check_same_shape(candidate, anchor)
    if epsilon < 0:
        raise InvalidInput(f"epsilon must be >= 0, got {epsilon}")
    a = anchor.data
    out = np.clip(candidate.data, a - epsilon, a + epsilon)
    np.clip(out, *anchor.pixel_range, out=out)
    return anchor.with_data(out)


def require_even(x: ImageTensor):
    if x.height % 2 or x.width % 2:
        raise ShapeError(f"height and width must be even, got {x.height}x{x.width}")
