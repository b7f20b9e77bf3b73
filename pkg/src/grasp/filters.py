"""Depthwise 2-D filtering on (H, W, C) arrays, routed through the kernels."""
import numpy as np

from . import kernels
from .errors import InvalidInput


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Separable 2-D Gaussian of odd ``size``, normalized to sum 1."""
    if size < 1 or size % 2 == 0:
        raise InvalidInput(f"window size must be odd and >= 1, got {size}")
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def box_window(size: int) -> np.ndarray:
    if size < 1 or size % 2 == 0:
        raise InvalidInput(f"window size must be odd and >= 1, got {size}")
    return np.full((size, size), 1.0 / (size * size))


def _chw(arr):
    return np.ascontiguousarray(np.transpose(arr, (2, 0, 1)))


def _hwc(arr):
    return np.ascontiguousarray(np.transpose(arr, (1, 2, 0)))


def filter_valid(arr: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Correlation at valid positions only: output shrinks by ``window - 1``."""
    return _hwc(kernels.correlate_depthwise(_chw(arr), window))


def filter_valid_adjoint(arr: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Transpose of :func:`filter_valid`: zero-padded full convolution."""
    kh, kw = window.shape
    padded = np.pad(_chw(arr), ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    return _hwc(kernels.correlate_depthwise(padded, window[::-1, ::-1]))


def filter_reflect(arr: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Same-size correlation with mirror padding (edge sample not repeated)."""
    kh, kw = window.shape
    if kh == 1 and kw == 1:
        return arr * window[0, 0]
    ph, pw = kh // 2, kw // 2
    padded = np.pad(_chw(arr), ((0, 0), (ph, ph), (pw, pw)), mode="reflect")
    return _hwc(kernels.correlate_depthwise(padded, window))
