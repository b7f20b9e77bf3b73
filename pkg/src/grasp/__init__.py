"""Imperceptible adversarial protection of images against manipulation models."""
from .engine import Ablation, DefenseConfig, DefenseTrace, generate_adversarial
from .errors import ConfigError, GraspError, InvalidInput, ModelError, ProtocolError, ShapeError
from .image import ImageTensor, NormKind, clip_to_ball, norm
from .kernels import BACKEND
from .losses import SsimConfig
from .projection import ProjectionConfig, total_gradient

__version__ = "0.1.0"

__all__ = [
    "Ablation", "DefenseConfig", "DefenseTrace", "generate_adversarial",
    "ConfigError", "GraspError", "InvalidInput", "ModelError", "ProtocolError", "ShapeError",
    "ImageTensor", "NormKind", "clip_to_ball", "norm", "BACKEND",
    "SsimConfig", "ProjectionConfig", "total_gradient",
]
