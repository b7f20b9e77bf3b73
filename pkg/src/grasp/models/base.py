"""The differentiable manipulation-model interface."""
from __future__ import annotations

import abc

import numpy as np

from ..errors import GraspError, ModelError, ShapeError
from ..image import ImageTensor


class ManipulationModel(abc.ABC):
    """An image-to-image model ``M`` that can pull cotangents back to its input.

    Subclasses implement :meth:`_forward` and :meth:`_vjp` on raw (H, W, C)
    arrays; the public methods validate shapes and wrap results.
    ``input_dims`` is ``(H, W, C)``; ``None`` for H or W accepts any size.
    """

    name = "model"

    def __init__(self, input_dims=(None, None, 3), output_range=(0.0, 1.0)):
        self.input_dims = tuple(input_dims)
        self.output_range = (float(output_range[0]), float(output_range[1]))

    @property
    def output_width(self) -> float:
        return self.output_range[1] - self.output_range[0]

    def check_input(self, x: ImageTensor):
        for want, got, what in zip(self.input_dims, x.shape, ("height", "width", "channels")):
            if want is not None and want != got:
                raise ShapeError(f"{self.name}: expected {what} {want}, got {got} "
                                 f"(input shape {x.shape})")

    def forward(self, x: ImageTensor) -> ImageTensor:
        self.check_input(x)
        y = self._call(self._forward, x.data)
        return ImageTensor(y, self.output_range)

    def vjp(self, x: ImageTensor, cotangent: ImageTensor) -> ImageTensor:
        """Jacobian-transpose of :meth:`forward` at ``x`` applied to ``cotangent``."""
        self.check_input(x)
        if cotangent.shape != x.shape:
            raise ShapeError(f"cotangent shape {cotangent.shape} != output shape {x.shape}")
        g = self._call(self._vjp, x.data, cotangent.data)
        if g.shape != x.shape:
            raise ShapeError(f"{self.name}: vjp returned {g.shape}, expected {x.shape}")
        return x.with_data(g)

    def _call(self, fn, *args):
        try:
            return np.asarray(fn(*args), dtype=np.float64)
        except GraspError:
            raise
        except Exception as exc:
            raise ModelError(f"{self.name} failed: {exc}") from exc

    @abc.abstractmethod
    def _forward(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _vjp(self, x: np.ndarray, c: np.ndarray) -> np.ndarray: ...

    def describe(self) -> dict:
        return {"name": self.name, "input_dims": list(self.input_dims),
                "output_range": list(self.output_range)}

    def close(self):
        pass


def forward(model: ManipulationModel, x: ImageTensor) -> ImageTensor:
    return model.forward(x)


def vjp(model: ManipulationModel, x: ImageTensor, cotangent: ImageTensor) -> ImageTensor:
    return model.vjp(x, cotangent)
