"""Loss terms with analytic gradients with respect to the adversarial image.

Each loss returns its raw value and gradient; choosing ascent or descent is
left to the caller.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput, ShapeError
from .filters import filter_valid, filter_valid_adjoint, gaussian_window
from .image import ImageTensor, require_even
from .wavelet import low_pass


@dataclass(frozen=True)
class SsimConfig:
    """Windowed SSIM settings.

    ``covariance=False`` swaps the structure term ``2*cov(x, y)`` for
    ``2*std(x)*std(y)``, which ignores the sign of the correlation.
    """

    window_size: int = 11
    sigma: float = 1.5
    data_range: float = 1.0
    k1: float = 0.01
    k2: float = 0.03
    covariance: bool = True

    def __post_init__(self):
        if self.window_size < 1 or self.window_size % 2 == 0:
            raise InvalidInput(f"SSIM window must be odd, got {self.window_size}")
        if self.data_range <= 0:
            raise InvalidInput("SSIM data_range must be positive")

    @property
    def window(self) -> np.ndarray:
        return gaussian_window(self.window_size, self.sigma)

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


@dataclass(frozen=True)
class LossEval:
    value: float
    grad_wrt_adv: ImageTensor


def _same_shape(x: ImageTensor, y: ImageTensor):
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")


def mse_output_loss(model, x: ImageTensor, x_adv: ImageTensor, y_clean: ImageTensor | None = None) -> LossEval:
    """Summed squared difference between ``M(x)`` and ``M(x_adv)``.

    ``y_clean`` may carry a precomputed ``M(x)``.
    """
    _same_shape(x, x_adv)
    if y_clean is None:
        y_clean = model.forward(x)
    y_adv = model.forward(x_adv)
    diff = y_clean.data - y_adv.data
    cot = y_adv.with_data(-2.0 * diff)
    grad = model.vjp(x_adv, cot)
    return LossEval(float(np.sum(diff * diff)), x_adv.with_data(grad.data))


def _ssim_terms(x, y, cfg: SsimConfig, need_grad: bool):
    w = cfg.window
    c1, c2 = cfg.c1, cfg.c2
    mu_x = filter_valid(x, w)
    mu_y = filter_valid(y, w)
    m_xx = filter_valid(x * x, w)
    m_yy = filter_valid(y * y, w)
    m_xy = filter_valid(x * y, w)
    var_x = m_xx - mu_x * mu_x
    var_y = m_yy - mu_y * mu_y
    a1 = 2.0 * mu_x * mu_y + c1
    b1 = mu_x * mu_x + mu_y * mu_y + c1
    b2 = var_x + var_y + c2
    if cfg.covariance:
        a2 = 2.0 * (m_xy - mu_x * mu_y) + c2
    else:
        sd_x = np.sqrt(np.maximum(var_x, 0.0))
        sd_y = np.sqrt(np.maximum(var_y, 0.0))
        a2 = 2.0 * sd_x * sd_y + c2
    num = a1 * a2
    den = b1 * b2
    smap = num / den
    if not need_grad:
        return smap, None

    # partials of num and den w.r.t. the window statistics of y
    if cfg.covariance:
        dnum_dmu = 2.0 * mu_x * a2 - 2.0 * mu_x * a1
        dnum_dmyy = np.zeros_like(num)
        dnum_dmxy = 2.0 * a1
    else:
        ratio = sd_x / np.maximum(sd_y, 1e-12)
        dnum_dmu = 2.0 * mu_x * a2 - 2.0 * a1 * ratio * mu_y
        dnum_dmyy = a1 * ratio
        dnum_dmxy = np.zeros_like(num)
    dden_dmu = 2.0 * mu_y * b2 - 2.0 * mu_y * b1
    dden_dmyy = b1
    den2 = den * den
    ds_dmu = (dnum_dmu * den - num * dden_dmu) / den2
    ds_dmyy = (dnum_dmyy * den - num * dden_dmyy) / den2
    ds_dmxy = dnum_dmxy / den
    scale = 1.0 / smap.size
    grad = (filter_valid_adjoint(ds_dmu, w)
            + 2.0 * y * filter_valid_adjoint(ds_dmyy, w)
            + x * filter_valid_adjoint(ds_dmxy, w)) * scale
    return smap, grad


def _ssim_config_for(x: ImageTensor, cfg: SsimConfig | None) -> SsimConfig:
    if cfg is None:
        cfg = SsimConfig(data_range=x.range_width)
    if x.height < cfg.window_size or x.width < cfg.window_size:
        raise InvalidInput(f"image {x.height}x{x.width} smaller than SSIM window {cfg.window_size}")
    return cfg


def ssim_value(x: ImageTensor, x_adv: ImageTensor, cfg: SsimConfig | None = None) -> float:
    _same_shape(x, x_adv)
    cfg = _ssim_config_for(x, cfg)
    smap, _ = _ssim_terms(x.data, x_adv.data, cfg, need_grad=False)
    return float(smap.mean())


def ssim_loss(x: ImageTensor, x_adv: ImageTensor, cfg: SsimConfig | None = None) -> LossEval:
    """Mean local SSIM over valid window positions and channels.

    When ``cfg`` is omitted the stabilizers follow ``x``'s pixel range.
    """
    _same_shape(x, x_adv)
    cfg = _ssim_config_for(x, cfg)
    smap, grad = _ssim_terms(x.data, x_adv.data, cfg, need_grad=True)
    return LossEval(float(smap.mean()), x_adv.with_data(grad))


def lf_loss(x: ImageTensor, x_adv: ImageTensor) -> LossEval:
    """L1 distance between the low-frequency reconstructions of both images.

    The subgradient of ``|d|`` at ``d == 0`` is taken as 0.
    """
    _same_shape(x, x_adv)
    require_even(x)
    d = low_pass(x.data) - low_pass(x_adv.data)
    # the low-pass projection is self-adjoint
    grad = -low_pass(np.sign(d))
    return LossEval(float(np.abs(d).sum()), x_adv.with_data(grad))


def finite_diff_grad(f: Callable[[ImageTensor], float], x: ImageTensor, h: float = 1e-5) -> ImageTensor:
    """Central-difference gradient of a scalar function, one element at a time."""
    if h <= 0:
        raise InvalidInput(f"step must be positive, got {h}")
    base = x.data.copy()
    flat = base.reshape(-1)
    out = np.empty(flat.size)
    for i in range(flat.size):
        v = flat[i]
        flat[i] = v + h
        fp = f(x.with_data(base))
        flat[i] = v - h
        fm = f(x.with_data(base))
        flat[i] = v
        out[i] = (fp - fm) / (2 * h)
    return x.with_data(out.reshape(x.shape))
