"""Exception hierarchy shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for every error raised on bad inputs or degenerate data."""


class ValidationError(ToolkitError, ValueError):
    """Inputs violate a documented precondition."""


class FormatError(ToolkitError, ValueError):
    """A file does not parse under its declared format."""


class AlignmentError(ToolkitError, KeyError):
    """Identifiers referenced by a pairing or gold file are missing."""

    def __str__(self):
        return Exception.__str__(self)


class DegenerateInputError(ToolkitError, ValueError):
    """Statistic is undefined for the input (zero norm, zero variance, ...)."""


class NumericalRankError(ToolkitError, ArithmeticError):
    """A covariance matrix is singular and no regularization was requested."""
