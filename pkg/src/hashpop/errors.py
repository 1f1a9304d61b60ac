"""Exception hierarchy used across the package."""


class HashpopError(Exception):
    """Base class for all package errors."""


class DomainError(HashpopError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedVariantError(HashpopError, TypeError):
    """The operation is not defined for this variant of a tagged union."""


class DivergentMomentError(DomainError):
    """A requested moment of a degree distribution is infinite."""

    def __init__(self, moment, message=None):
        self.moment = moment
        super().__init__(message or f"{moment} of the degree distribution diverges")


class NumericError(HashpopError, ArithmeticError):
    """Overflow or other floating point failure."""


class ConvergenceError(NumericError):
    """An iterative evaluation did not converge."""

    def __init__(self, message, terms_used=None):
        self.terms_used = terms_used
        super().__init__(message)


class TruncationError(NumericError):
    """Probability mass leaked past the truncated state space."""

    def __init__(self, message, required_x_max):
        self.required_x_max = required_x_max
        super().__init__(message)


class RankDeficiencyError(NumericError):
    """Normal equations of a least-squares step are singular."""


class NoSignalError(DomainError):
    """A series carries no positive values to fit."""


class UndefinedStatisticError(DomainError):
    """A summary statistic is undefined for the given data."""


class EmptyInputError(HashpopError, ValueError):
    """No usable records were provided."""


class SchemaError(HashpopError, ValueError):
    """Input file does not follow the expected schema."""
