"""Exception types shared across modules."""

from .mass_model import GeometryError
from .quadrature import QuadratureError


class ConvergenceError(RuntimeError):
    """An iterative fit did not converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class DegenerateDataError(ValueError):
    """Data cannot constrain the requested fit (singular normal equations)."""


class TooFewPointsError(ValueError):
    pass


class UnsupportedWindowError(ValueError):
    pass


class GridResolutionError(ValueError):
    pass


__all__ = [
    "ConvergenceError",
    "DegenerateDataError",
    "GeometryError",
    "GridResolutionError",
    "QuadratureError",
    "TooFewPointsError",
    "UnsupportedWindowError",
]
