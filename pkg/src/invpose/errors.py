"""Exception hierarchy.

The CLI maps these onto exit codes: ``ConfigError`` subclasses give 2,
``NumericalError`` subclasses give 3, ``OSError`` gives 4.
"""

from __future__ import annotations


class InvPoseError(Exception):
    """Base class for all package errors."""


class ConfigError(InvPoseError, ValueError):
    """Bad user input: malformed files, invalid parameters."""


class MeshSyntaxError(ConfigError):
    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class MeshValidationError(ConfigError):
    pass


class MetadataError(ConfigError):
    pass


class PoseDomainError(ConfigError):
    """Pose parameters outside their domain (e.g. psi_x^2 + psi_y^2 > 1)."""


class DegenerateFrameError(PoseDomainError):
    """Registration frame or projected wheelbase cannot be constructed."""


class BehindCameraError(PoseDomainError):
    """A point lies at or behind the camera plane under perspective projection."""


class ShapeError(ConfigError):
    pass


class NumericalError(InvPoseError, ArithmeticError):
    pass


class EmptyPopulationError(NumericalError):
    pass


class SingularCovarianceError(NumericalError):
    pass


class TooFewPixelsError(NumericalError):
    def __init__(self, count: int, required: int):
        super().__init__(f"only {count} covered pixels, need at least {required}")
        self.count = count
        self.required = required
