"""Iterative generation of a protected (adversarial) image.

Each iteration evaluates the three losses at the current adversarial image,
turns their gradients into unit-L1 directions that all point "forward"
(output MSE up, SSIM up, low-frequency distance down), merges them with
:func:`grasp.projection.total_gradient`, takes a step of size ``kappa``,
clips into the epsilon ball, and low-passes the perturbation.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, ModelError
from .filters import filter_reflect, gaussian_window
from .image import ImageTensor, NormKind, clip_to_ball, norm, require_even
from .losses import SsimConfig, lf_loss, mse_output_loss, ssim_loss
from .projection import ProjectionConfig, normalize_l1, total_gradient


@dataclass(frozen=True)
class Ablation:
    """Which loss directions enter the update, and whether pairs are projected."""

    mse: bool = True
    ssim: bool = True
    lf: bool = True
    projection: bool = True


ABLATION_ROWS = {
    "mse_only": Ablation(ssim=False, lf=False),
    "mse_ssim": Ablation(lf=False),
    "mse_ssim_lf_naive": Ablation(projection=False),
    "full": Ablation(),
}


@dataclass(frozen=True)
class DefenseConfig:
    epsilon: float = 0.05
    iterations: int = 20
    kappa: float = 10.0
    smoothing_kernel: int = 11
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    ssim: SsimConfig | None = None
    ablation: Ablation = field(default_factory=Ablation)
    probe_seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidInput(f"epsilon must be >= 0, got {self.epsilon}")
        if self.iterations < 0:
            raise InvalidInput(f"iterations must be >= 0, got {self.iterations}")
        if self.smoothing_kernel < 1 or self.smoothing_kernel % 2 == 0:
            raise InvalidInput(f"smoothing kernel must be odd, got {self.smoothing_kernel}")

    @property
    def xi(self) -> float:
        return self.projection.xi

    def replace(self, **changes) -> DefenseConfig:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    mse: float
    ssim: float
    lf: float
    conflict_flags: tuple[bool, bool, bool]
    linf: float


@dataclass
class DefenseTrace:
    """Per-iteration losses (at the image the step started from) and the
    L-inf size of the perturbation after the step."""

    records: list[IterationRecord] = field(default_factory=list)
    x_adv: ImageTensor | None = None

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]


def gaussian_smooth_perturbation(eta: ImageTensor, kernel: int = 11) -> ImageTensor:
    """Gaussian blur (sigma = kernel / 6, mirror padding) of each channel."""
    if kernel < 1 or kernel % 2 == 0:
        raise InvalidInput(f"smoothing kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return eta
    return eta.with_data(filter_reflect(eta.data, gaussian_window(kernel, kernel / 6)))


def _probe_direction(model, x_adv: ImageTensor, seed: int) -> ImageTensor:
    # random output-space cotangent pulled back through the model: a direction
    # the model is sensitive to, used when the MSE gradient vanishes (x_adv == x)
    rng = np.random.default_rng(seed)
    cot = x_adv.with_data(rng.standard_normal(x_adv.shape))
    return model.vjp(x_adv, cot)


def defense_directions(model, x, x_adv, cfg: DefenseConfig, y_clean=None):
    """Evaluate the losses at ``x_adv`` and return ``(g, h, z, (mse, ssim, lf))``.

    Disabled losses contribute a zero direction.
    """
    xi = cfg.xi
    mse = mse_output_loss(model, x, x_adv, y_clean)
    ssim = ssim_loss(x, x_adv, cfg.ssim)
    lf = lf_loss(x, x_adv)
    zero = ImageTensor.zeros_like(x_adv)
    if cfg.ablation.mse:
        grad = mse.grad_wrt_adv
        if not np.any(grad.data):
            grad = _probe_direction(model, x_adv, cfg.probe_seed)
        g = normalize_l1(grad, xi)
    else:
        g = zero
    h = normalize_l1(ssim.grad_wrt_adv, xi) if cfg.ablation.ssim else zero
    z = -normalize_l1(lf.grad_wrt_adv, xi) if cfg.ablation.lf else zero
    return g, h, z, (mse.value, ssim.value, lf.value)


def generate_adversarial(model, x: ImageTensor, cfg: DefenseConfig | None = None):
    """Run the defense loop on ``x``; return ``(x_adv, trace)``.

    A :class:`~grasp.errors.ModelError` raised mid-run carries the partial
    trace in its ``trace`` attribute.
    """
    cfg = cfg or DefenseConfig()
    require_even(x)
    model.check_input(x)
    trace = DefenseTrace()
    x_adv = x
    try:
        y_clean = model.forward(x)
        for _ in range(cfg.iterations):
            g, h, z, (mse, ssim, lf) = defense_directions(model, x, x_adv, cfg, y_clean)
            bundle = total_gradient(g, h, z, cfg.projection, project=cfg.ablation.projection)
            candidate = x_adv + cfg.kappa * bundle.g_total
            stepped = clip_to_ball(candidate, x, cfg.epsilon)
            eta = gaussian_smooth_perturbation(stepped - x, cfg.smoothing_kernel)
            x_adv = clip_to_ball(x + eta, x, cfg.epsilon)
            linf = norm(x_adv - x, NormKind.LINF)
            trace.records.append(IterationRecord(mse, ssim, lf, bundle.conflict_flags, linf))
    except ModelError as exc:
        trace.x_adv = x_adv
        exc.trace = trace
        raise
    trace.x_adv = x_adv
    return x_adv, trace
