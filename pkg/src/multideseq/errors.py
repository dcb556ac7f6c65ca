"""Exception types raised by multideseq."""


class MultiDESeqError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(MultiDESeqError, ValueError):
    pass


class DimensionError(ValidationError):
    pass


class InvalidDispersionError(ValidationError):
    """Variance below the mean: not a negative binomial."""


class InfeasibleEnumerationError(MultiDESeqError):
    """Too many compositions to enumerate; use the Monte Carlo test instead."""


class NumericalDegeneracyError(MultiDESeqError, ArithmeticError):
    pass


class ParseError(ValidationError):
    pass
