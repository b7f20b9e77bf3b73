from .base import ManipulationModel, forward, vjp
from .bridge import BridgeModel, bridge_connect
from .surrogates import BUILTINS, AffineModel, ConvSurrogate, IdentityModel, build_model

__all__ = [
    "ManipulationModel", "forward", "vjp",
    "IdentityModel", "AffineModel", "ConvSurrogate", "BUILTINS", "build_model",
    "BridgeModel", "bridge_connect",
]
