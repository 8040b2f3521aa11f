"""Exception hierarchy shared by every deflatecrb module."""
from __future__ import annotations

__all__ = [
    "BoundDomainError",
    "DeflateCRBError",
    "DimensionError",
    "ExperimentError",
    "ExportError",
    "ParameterError",
    "RankDeficiencyError",
    "ScenarioLoadError",
    "SingularGramError",
    "SolverError",
    "SupportError",
]


class DeflateCRBError(RuntimeError):
    """Root of all errors raised by the library."""


class DimensionError(DeflateCRBError, ValueError):
    """Raised when problem sizes are invalid or array shapes disagree."""


class ParameterError(DeflateCRBError, ValueError):
    """Raised when a scalar argument is outside its admissible range."""


class RankDeficiencyError(DeflateCRBError):
    """Raised when a matrix that must have full column rank does not."""

    def __init__(self, message: str, *, rank: int, expected: int):
        super().__init__(f"{message} (numerical rank {rank}, expected {expected})")
        self.rank = rank
        self.expected = expected


class SingularGramError(DeflateCRBError):
    """Raised when a Gram matrix is too ill-conditioned to invert."""

    def __init__(self, message: str, *, condition_number: float):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


class BoundDomainError(ParameterError):
    """Raised when asymptotic ratios fall outside the domain of a closed form."""


class SupportError(ParameterError):
    """Raised when a Stieltjes transform is requested on the spectral support."""


class SolverError(DeflateCRBError):
    """Raised when a sparse solver meets a degenerate or non-finite problem."""


class ExperimentError(DeflateCRBError):
    """Raised when too many Monte-Carlo trials fail at a grid point."""


class ScenarioLoadError(DeflateCRBError):
    """Raised when a scenario file cannot be read or validated."""


class ExportError(DeflateCRBError):
    """Raised when results cannot be written to or read from disk."""
