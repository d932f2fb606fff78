"""Exception types shared across the package."""


class UsageError(ValueError):
    """Raised when a function is called with arguments violating its contract."""


class InvalidAssociationError(ValueError):
    """Raised when a set of paths shares an observation."""


class DegenerateBeliefError(ArithmeticError):
    """Raised when every particle weight of a belief has collapsed to zero."""


class DataError(ValueError):
    """Raised when an input file cannot be parsed.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending record, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
