"""Exception types shared across the package."""


class AlcointError(Exception):
    """Base class for package errors."""


class ConfigurationError(AlcointError, ValueError):
    """Invalid model, tuning or experiment configuration."""


class LengthError(AlcointError, ValueError):
    """Input array too short for the requested operation."""


class EstimationError(AlcointError, ArithmeticError):
    """Estimator cannot be computed on the given data (e.g. singular Gram matrix)."""


class ConvergenceError(AlcointError, RuntimeError):
    """Iterative solver hit its iteration cap.

    The last iterate and its KKT residual are kept so callers can inspect
    how far off the solver was.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class UnsupportedRegimeError(AlcointError, ValueError):
    """Limit objective is not well defined for the requested parameters."""
