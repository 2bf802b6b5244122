"""Exception taxonomy shared across the package."""


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class InputValidationError(SolverError):
    """Malformed input: dimension mismatch, negative alpha, bad config."""


class ProblemFileError(InputValidationError):
    """Problem file failed to parse or validate; message carries the location."""


class UnsupportedProblemError(SolverError):
    """The requested operation does not apply to this problem form."""


class InfeasibleProblemError(SolverError):
    """The constraint system admits no feasible point."""


class NumericalError(SolverError):
    """A numerical procedure failed: bracket expansion, invariant violation."""
