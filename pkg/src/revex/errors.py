"""Exception hierarchy shared by all revex modules."""


class RevexError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(RevexError, ValueError):
    """An argument violates a documented precondition."""


class FormatError(RevexError):
    """A file does not conform to its on-disk format (bad magic, truncated
    payload, inconsistent header)."""


class SolverError(RevexError):
    """A least-squares system could not be solved (singular or
    underdetermined)."""


class TransportError(RevexError):
    """A remote predictor could not be reached after all retries."""

    def __init__(self, message, attempts=0):
        super().__init__(message)
        self.attempts = attempts


class ProtocolError(RevexError):
    """A remote predictor answered with a malformed or non-conformant
    response."""


class UndefinedDropError(RevexError):
    """Average drop is undefined because the base prediction is zero."""
