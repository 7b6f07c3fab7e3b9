"""Exception types shared across the toolkit.

Everything user-correctable derives from ValidationError (and hence ValueError);
the command-line entrypoint maps it to exit code 2.
"""


class BlockvarError(Exception):
    """Base class for toolkit errors."""


class ValidationError(BlockvarError, ValueError):
    """Input data, design or configuration violates a precondition."""


class ParseError(ValidationError):
    """A malformed row in an input file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message}, line {line}"
        super().__init__(message)


class EstimatorNotApplicable(ValidationError):
    """The requested estimator is undefined for this block structure."""


class EnumerationCapExceeded(ValidationError):
    """Exhaustive enumeration would exceed the configured cap."""
