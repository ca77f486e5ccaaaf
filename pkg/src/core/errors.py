"""
Exception hierarchy shared by every module.

Each error carries the process exit code the command line uses for it.
"""

from typing import Any, Optional


class IsacError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigurationError(IsacError, ValueError):
    """Invalid scenario, table or processing configuration."""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None):
        self.message = message
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)

    def nested(self, prefix: str) -> "ConfigurationError":
        """Re-root a relative path (or none) under a JSON path prefix."""
        if self.path and self.path.startswith("$"):
            return self
        path = f"{prefix}.{self.path}" if self.path else prefix
        return ConfigurationError(self.message, path)


class DataError(IsacError):
    """Input data is malformed or unsuitable."""

    exit_code = 3


class SizeError(DataError, ValueError):
    """Array shapes do not match what the operation expects."""


class OrderingError(DataError, ValueError):
    """Time stamps went backwards."""


class InsufficientDataError(DataError):
    """Not enough samples to produce an estimate."""


class InsufficientPeriodicityError(InsufficientDataError):
    """The signal shows no usable periodic structure."""


class DatasetError(DataError):
    """Problem with an on-disk dataset container."""


class MissingFileError(DatasetError, FileNotFoundError):
    """A container file is absent."""


class FormatVersionError(DatasetError):
    """The container declares an unsupported format version."""


class PayloadLengthError(DatasetError):
    """Binary payload size does not match the counts in meta.json."""

    def __init__(self, expected: int, actual: int, filename: str = "cfr.bin"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{filename}: expected {expected} bytes, found {actual} bytes")


class NumericalError(IsacError, ArithmeticError):
    """Numerical failure (non-positive covariance, singular system)."""

    exit_code = 4


class GeometryError(NumericalError, ValueError):
    """Geometry is undefined, e.g. a target coincides with a node."""


class DegeneracyError(NumericalError):
    """The measurement geometry does not determine a unique solution."""


class ConvergenceError(NumericalError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message: str, fix: Any = None, residual: float = float("nan")):
        self.fix = fix
        self.residual = residual
        super().__init__(f"{message} (final residual {residual:.6g} m)")
