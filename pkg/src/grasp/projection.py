"""Conflict-aware combination of the three loss directions.

Two directions ``a`` and ``b`` conflict when their inner product is <= 0.
A conflicting pair is combined after projecting each onto the normal plane
of the other, which leaves nothing in the result that works against either
direction; a non-conflicting pair is combined as a plain weighted sum.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ShapeError
from .image import ImageTensor, NormKind, norm

log = logging.getLogger(__name__)

_degenerate_lock = threading.Lock()
_degenerate_count = 0


def degenerate_projections() -> int:
    """How many projections onto a zero vector have been skipped so far."""
    return _degenerate_count


def reset_diagnostics():
    global _degenerate_count
    with _degenerate_lock:
        _degenerate_count = 0


def _note_degenerate():
    global _degenerate_count
    with _degenerate_lock:
        _degenerate_count += 1


@dataclass(frozen=True)
class ProjectionConfig:
    lambda1: float = 10.0
    mu1: float = 1.0
    lambda2: float = 5.0
    mu2: float = 1.0
    lambda3: float = 1.0
    mu3: float = 1.0
    eta1: float = 11.0
    eta2: float = 3.0
    eta3: float = 19.0
    xi: float = 1e-12

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not np.isfinite(value):
                raise InvalidInput(f"{name} must be finite, got {value}")
        if self.xi <= 0:
            raise InvalidInput(f"xi must be positive, got {self.xi}")


@dataclass(frozen=True)
class GradientBundle:
    g: ImageTensor
    h: ImageTensor
    z: ImageTensor
    gs1: ImageTensor
    gs2: ImageTensor
    gs3: ImageTensor
    g_total: ImageTensor
    conflict_flags: tuple[bool, bool, bool]
    degenerate: int = 0


def normalize_l1(grad: ImageTensor, xi: float = 1e-12) -> ImageTensor:
    if xi <= 0:
        raise InvalidInput(f"xi must be positive, got {xi}")
    return grad.with_data(grad.data / (norm(grad, NormKind.L1_SUM) + xi))


def _flat_dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a.ravel(), b.ravel()))


def _project(a: np.ndarray, b: np.ndarray, ab: float) -> tuple[np.ndarray, bool]:
    bb = _flat_dot(b, b)
    if bb == 0.0:
        return a, True
    return a - (ab / bb) * b, False


def project_onto_normal_plane(a: ImageTensor, b: ImageTensor) -> ImageTensor:
    """Remove from ``a`` its component along ``b``.

    A zero ``b`` leaves ``a`` unchanged and bumps :func:`degenerate_projections`.
    """
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    out, degenerate = _project(a.data, b.data, _flat_dot(a.data, b.data))
    if degenerate:
        _note_degenerate()
    return a.with_data(out)


def _combine(a, b, lam, mu):
    ab = _flat_dot(a, b)
    if ab <= 0.0:
        pa, da = _project(a, b, ab)
        pb, db = _project(b, a, ab)
        return lam * pa + mu * pb, True, int(da) + int(db)
    return lam * a + mu * b, False, 0


def combine_pair(a: ImageTensor, b: ImageTensor, lam: float, mu: float) -> ImageTensor:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    out, _, degenerate = _combine(a.data, b.data, lam, mu)
    for _ in range(degenerate):
        _note_degenerate()
    return a.with_data(out)


def total_gradient(g: ImageTensor, h: ImageTensor, z: ImageTensor,
                   cfg: ProjectionConfig | None = None, project: bool = True) -> GradientBundle:
    """Combine the pairs (g, h), (h, z), (g, z) and weight the results.

    With ``project=False`` every pair takes the plain weighted-sum branch,
    which is the "no projection" ablation.
    """
    cfg = cfg or ProjectionConfig()
    if not g.shape == h.shape == z.shape:
        raise ShapeError(f"shape mismatch: {g.shape}, {h.shape}, {z.shape}")
    pairs = ((g.data, h.data, cfg.lambda1, cfg.mu1),
             (h.data, z.data, cfg.lambda2, cfg.mu2),
             (g.data, z.data, cfg.lambda3, cfg.mu3))
    parts, flags, degenerate = [], [], 0
    for a, b, lam, mu in pairs:
        if project:
            out, conflict, deg = _combine(a, b, lam, mu)
        else:
            out, conflict, deg = lam * a + mu * b, _flat_dot(a, b) <= 0.0, 0
        parts.append(out)
        flags.append(conflict)
        degenerate += deg
    for _ in range(degenerate):
        _note_degenerate()
    if degenerate:
        log.debug("%d projections onto a zero direction skipped", degenerate)
    total = cfg.eta1 * parts[0] + cfg.eta2 * parts[1] + cfg.eta3 * parts[2]
    wrap = g.with_data
    return GradientBundle(g, h, z, wrap(parts[0]), wrap(parts[1]), wrap(parts[2]),
                          wrap(total), tuple(flags), degenerate)
