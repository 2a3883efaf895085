"""Exception types shared across the package."""


class MigrError(Exception):
    """Base class for all package errors."""


class ConfigError(MigrError):
    """Invalid or inconsistent experiment configuration.

    The message starts with the dotted path of the offending field,
    e.g. ``source.m: must lie in (2, 3)``.
    """


class FieldFormatError(MigrError):
    """Malformed field file (bad magic, truncated payload, unknown dtype)."""


class ShapeMismatchError(MigrError):
    """Array shape incompatible with the grid or symbol it is paired with."""


class DiagonalSingularityError(MigrError):
    """Covariance oracle evaluated on the diagonal x == y where it diverges."""


class NotContractingError(MigrError):
    """Fixed-point iteration failed to contract (wavenumber too small)."""

    def __init__(self, message, k=None, realization=None):
        super().__init__(message)
        self.k = k
        self.realization = realization


class IterationLimitError(MigrError):
    """Fixed-point iteration exceeded max_iter before reaching tolerance."""

    def __init__(self, message, k=None, realization=None):
        super().__init__(message)
        self.k = k
        self.realization = realization


class CoverageError(MigrError):
    """Requested band or shift not covered by the dataset frequency grid."""


class VacuousCheckError(MigrError):
    """A diagnostic was requested on data for which it is vacuous."""
