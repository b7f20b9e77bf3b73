"""Exception hierarchy shared by every grasp module."""


class GraspError(Exception):
    """Base class for all errors raised by grasp."""


class InvalidInput(GraspError, ValueError):
    pass


class ShapeError(GraspError, ValueError):
    pass


class ModelError(GraspError, RuntimeError):
    """A manipulation model failed to produce an output or gradient.

    ``trace`` carries the partial :class:`~grasp.engine.DefenseTrace` when the
    failure happened inside the defense loop.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ProtocolError(GraspError):
    """Malformed or unexpected frame on a model bridge."""


class ConfigError(GraspError, ValueError):
    pass
