"""Seeded synthetic images for reproducible runs without a face dataset."""
import numpy as np

from .filters import filter_reflect, gaussian_window
from .image import ImageTensor


def seeded_suite(n: int = 16, size: int = 64, seed: int = 0, channels: int = 3) -> list[ImageTensor]:
    """``n`` smooth random colour fields in ``[0.15, 0.85]``.

    Uniform noise is low-passed (15x15 Gaussian, sigma 3) and stretched, so
    images have natural-looking low-frequency structure.
    """
    rng = np.random.default_rng(seed)
    window = gaussian_window(15, 3.0)
    out = []
    for _ in range(n):
        smooth = filter_reflect(rng.uniform(size=(size, size, channels)), window)
        smooth = (smooth - smooth.min()) / (smooth.max() - smooth.min())
        out.append(ImageTensor(np.clip(0.15 + 0.7 * smooth, 0.0, 1.0)))
    return out
