"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data or configuration violates a documented precondition."""


class UndefinedStatisticError(ValueError):
    """A statistic is undefined for the given input (e.g. no comparable pairs)."""


class SolverStallError(RuntimeError):
    """An inner optimizer hit its iteration cap before reaching tolerance.

    Carries the last iterate so callers can inspect or salvage it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NumericalFailureError(RuntimeError):
    """A computation produced NaN/Inf where a finite value is required."""


class GridSearchError(RuntimeError):
    """Every grid point of a cross-validation search failed to fit."""
