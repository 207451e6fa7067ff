"""Exception taxonomy shared across the library and the CLI."""

from __future__ import annotations


class RareflowError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(RareflowError, ValueError):
    """Objects live on incompatible grids or have mismatched shapes."""


class DomainError(RareflowError, ValueError):
    """A numeric argument is outside its admissible range."""


class ValidationError(RareflowError, ValueError):
    """An input object violates a structural requirement (symmetry, sign, ...)."""


class IntegrationError(RareflowError, RuntimeError):
    """A quadrature failed to converge within its refinement budget."""


class SolverError(RareflowError, RuntimeError):
    """Base class for time-stepping failures."""


class StepFailureError(SolverError):
    """The implicit solve of a single time step did not converge."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class DivergenceError(SolverError):
    """Non-finite values appeared along a trajectory."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class ResolutionError(RareflowError, ValueError):
    """The time grid cannot resolve a requested oscillation."""


class ConfigError(RareflowError, ValueError):
    """An experiment configuration is missing, malformed, or out of range."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
