"""Exception hierarchy.

``DataError`` covers malformed or out-of-domain input (the CLI maps it to
exit code 2); ``NumericalError`` covers numerical conditions such as an
unstable transition matrix or a non-miniphase block (exit code 3).
"""


class FactorSeqError(Exception):
    """Base class for all package errors."""


class DataError(FactorSeqError, ValueError):
    """Input data or arguments violate a precondition."""


class NumericalError(FactorSeqError, ArithmeticError):
    """A numerical procedure cannot produce a trustworthy result."""
