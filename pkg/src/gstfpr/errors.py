"""Exception types shared across the package."""


class GSTDesignError(Exception):
    """Base class for all errors raised by gstfpr."""


class ValidationError(GSTDesignError, ValueError):
    """Malformed input: bad file, unknown label, non-unitary matrix, ..."""


class ParseError(ValidationError):
    """A text file could not be parsed. Carries the offending line number."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where += f"{path}"
        if lineno is not None:
            where += f":{lineno}"
        super().__init__(f"{where}: {message}" if where else message)


class IncompleteGermSetError(ValidationError):
    """The germ set does not amplify every amplifiable direction."""

    def __init__(self, message, missing=None):
        self.missing = missing
        super().__init__(message)


class InsufficientFiducialsError(ValidationError):
    """No subset of fiducial pairs reaches the required directional rank."""


class NumericalError(GSTDesignError, ArithmeticError):
    """A numerical guard tripped (imaginary residue, failed decomposition, ...)."""
