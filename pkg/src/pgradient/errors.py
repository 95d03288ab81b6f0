"""Exception hierarchy shared by every module."""


class PGradientError(Exception):
    """Base class for errors raised by this package."""


class MalformedInputError(PGradientError, ValueError):
    """Bad text, bad generator index, or a structurally invalid record.

    ``line`` and ``column`` are 1-based when known.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class AlphabetMismatchError(PGradientError, ValueError):
    pass


class UndefinedRootError(PGradientError, ValueError):
    """e_p is only defined for non-identity elements."""


class DomainError(PGradientError, ValueError):
    """An argument lies outside the setting where an operation makes sense."""


class NotAHomomorphismError(PGradientError, ValueError):
    def __init__(self, message, relator=None):
        self.relator = relator
        super().__init__(message)


class NotSurjectiveError(PGradientError, ValueError):
    def __init__(self, message, generated_order=None):
        self.generated_order = generated_order
        super().__init__(message)


class NestingError(PGradientError, ValueError):
    pass


class ResourceLimitError(PGradientError, RuntimeError):
    """A configured budget (cosets, matrix size, search steps) was exceeded."""

    def __init__(self, message, required=None, budget=None):
        self.required = required
        self.budget = budget
        super().__init__(message)


class InvariantViolation(PGradientError, AssertionError):
    """A property guaranteed by theory failed: this is a bug, not bad input."""
