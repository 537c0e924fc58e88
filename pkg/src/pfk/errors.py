"""Exception hierarchy shared by every module.

Input problems derive from ``ValueError`` (the CLI maps them to exit code 2);
numerical failures derive from ``RuntimeError`` (exit code 3).
"""


class PFKError(Exception):
    pass


class InvalidInputError(PFKError, ValueError):
    pass


class InvalidDimensionError(InvalidInputError):
    pass


class InvalidDomainError(InvalidInputError):
    pass


class InvalidExponentError(InvalidInputError):
    pass


class ResolutionTooCoarseError(InvalidInputError):
    pass


class UnsupportedDomainError(InvalidInputError):
    pass


class InvalidCondenserError(InvalidInputError):
    pass


class SolverError(PFKError, RuntimeError):
    """Raised when an iterative method cannot produce an answer at all."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic
