"""
Exception hierarchy for fractional Navier-Stokes computations.
"""


class FracNSError(Exception):
    """Base exception for all fracns errors."""
    pass


class DomainError(FracNSError, ValueError):
    """Raised when an argument lies outside the mathematical domain of an operation."""
    pass


class ConvergenceError(FracNSError):
    """Raised when a series or an iteration fails to reach its tolerance."""
    pass


class QuadratureError(ConvergenceError):
    """Raised when adaptive quadrature fails or stalls."""
    pass


class PicardDivergenceError(ConvergenceError):
    """Raised when Picard iteration exceeds its iteration budget."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class DegenerateInputError(FracNSError):
    """Raised when an estimate ratio is undefined (zero denominator)."""
    pass


class GridMismatchError(FracNSError, ValueError):
    """Raised when fields, trajectories or samples live on incompatible grids."""
    pass


class FieldFormatError(FracNSError):
    """Raised when a binary field file is malformed."""
    pass


class ConfigError(FracNSError):
    """Raised when an experiment configuration cannot be parsed or validated."""

    def __init__(self, message: str, key: str = ""):
        super().__init__(message)
        self.key = key


class ExperimentError(FracNSError):
    """Raised when an experiment fails as a whole; carries the failed run result."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
