"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: usage errors exit 2,
:class:`DataError` exits 3, :class:`NumericError` exits 4.
"""

__all__ = [
    "FusionCurveError",
    "ConfigurationError",
    "DataError",
    "DomainError",
    "NumericError",
    "GroupingError",
]


class FusionCurveError(Exception):
    """Base class for package errors."""


class ConfigurationError(FusionCurveError):
    """Invalid configuration values (bad grids, degenerate intervals, ...)."""


class DataError(FusionCurveError):
    """Malformed or inconsistent input data."""


class DomainError(FusionCurveError):
    """Arguments outside the mathematical domain of an operation."""


class NumericError(FusionCurveError):
    """Numerical failure (singular system, rank deficiency, non-PD matrix)."""


class GroupingError(FusionCurveError):
    """Invalid group structure (empty group, labels not covering curves)."""
