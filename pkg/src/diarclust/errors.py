"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation problems (including
parse and schema errors in input files) exit with 1, OS-level I/O failures
with 2, and numerical breakdowns during iterative inference with 3.
"""


class DiarclustError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DiarclustError):
    """Invalid input values, violated preconditions, or schema mismatches."""


class ParseError(ValidationError):
    """A file could not be parsed; the message names the offending line."""


class InfeasibleAssignmentError(ValidationError):
    """More rows than columns in a one-to-one assignment problem."""


class NumericalError(DiarclustError):
    """Non-finite values appeared during numerical iteration."""
