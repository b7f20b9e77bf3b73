"""Analytic stand-ins for a pretrained face manipulation network."""
from __future__ import annotations

import threading

import numpy as np

from .. import kernels
from ..errors import ConfigError
from .base import ManipulationModel
from .prng import XorShift64Star


class IdentityModel(ManipulationModel):
    name = "identity"

    def _forward(self, x):
        return x.copy()

    def _vjp(self, x, c):
        return c.copy()


class AffineModel(ManipulationModel):
    """Per-channel ``y = gain * x + bias``."""

    name = "affine"

    def __init__(self, gain=(1.0, 1.0, 1.0), bias=(0.0, 0.0, 0.0), input_dims=(None, None, 3),
                 input_range=(0.0, 1.0)):
        self.gain = np.asarray(gain, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        ends = np.stack([self.gain * input_range[0] + self.bias,
                         self.gain * input_range[1] + self.bias])
        super().__init__((input_dims[0], input_dims[1], len(self.gain)),
                         (float(ends.min()), float(ends.max())))

    def _forward(self, x):
        return x * self.gain + self.bias

    def _vjp(self, x, c):
        return c * self.gain

    def describe(self):
        d = super().describe()
        d.update(gain=self.gain.tolist(), bias=self.bias.tolist())
        return d


class ConvSurrogate(ManipulationModel):
    """Two 3x3 same-padded convolutions, each followed by tanh.

    Inputs in ``[0, 1]`` are first mapped to ``[-1, 1]``. Weights and biases
    are uniform in ``[-0.5, 0.5]``, drawn from :class:`XorShift64Star` in the
    order ``w1`` (hidden, C, 3, 3), ``b1``, ``w2`` (C, hidden, 3, 3), ``b2``,
    each in row-major order. Outputs lie in ``(-1, 1)``.
    """

    name = "conv"

    def __init__(self, seed: int = 42, hidden: int = 64, channels: int = 3,
                 input_dims=(None, None, None)):
        self.seed = int(seed)
        self.hidden = int(hidden)
        self.channels = int(channels)
        super().__init__((input_dims[0], input_dims[1], channels), (-1.0, 1.0))
        rng = XorShift64Star(self.seed)

        def draw(*shape):
            n = int(np.prod(shape))
            return np.array(rng.uniforms(n, -0.5, 0.5)).reshape(shape)

        self.w1 = draw(hidden, channels, 3, 3)
        self.b1 = draw(hidden)
        self.w2 = draw(channels, hidden, 3, 3)
        self.b2 = draw(channels)
        # transposed, flipped weights for the backward pass
        self._w1t = np.ascontiguousarray(self.w1.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        self._w2t = np.ascontiguousarray(self.w2.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
        self._cache = threading.local()

    @staticmethod
    def _conv(a, w, b=None):
        padded = np.pad(a, ((0, 0), (1, 1), (1, 1)))
        out = kernels.conv_multi(padded, w)
        if b is not None:
            out += b[:, None, None]
        return out

    def _activations(self, x):
        # forward and vjp are usually called back to back at the same point
        hit = getattr(self._cache, "entry", None)
        if hit is not None and hit[0].shape == x.shape and np.array_equal(hit[0], x):
            return hit[1], hit[2]
        a1, y = self._compute(x)
        self._cache.entry = (x.copy(), a1, y)
        return a1, y

    def _compute(self, x):
        a0 = np.ascontiguousarray(np.transpose(2.0 * x - 1.0, (2, 0, 1)))
        a1 = np.tanh(self._conv(a0, self.w1, self.b1))
        y = np.tanh(self._conv(a1, self.w2, self.b2))
        return a1, y

    def _forward(self, x):
        _, y = self._activations(x)
        return np.transpose(y, (1, 2, 0))

    def _vjp(self, x, c):
        a1, y = self._activations(x)
        dz2 = np.transpose(c, (2, 0, 1)) * (1.0 - y * y)
        dz1 = self._conv(dz2, self._w2t) * (1.0 - a1 * a1)
        da0 = self._conv(dz1, self._w1t)
        return 2.0 * np.transpose(da0, (1, 2, 0))

    def describe(self):
        d = super().describe()
        d.update(seed=self.seed, hidden=self.hidden)
        return d


BUILTINS = {
    "identity": IdentityModel,
    "affine": AffineModel,
    "conv": ConvSurrogate,
}


def build_model(name: str, seed: int = 42, dims=(None, None, 3), **kwargs) -> ManipulationModel:
    """Instantiate a built-in surrogate by name."""
    if name not in BUILTINS:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(BUILTINS)}")
    if name == "conv":
        return ConvSurrogate(seed=seed, channels=dims[2], input_dims=dims, **kwargs)
    return BUILTINS[name](input_dims=dims, **kwargs)
