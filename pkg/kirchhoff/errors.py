"""Exceptions and CLI exit codes"""

# Built-in
import enum


class ExitCode(enum.IntEnum):
    """Exit status of the command line interface.

    Every exception class below maps to exactly one of these codes
    through its ``exit_code`` attribute.
    """

    OK = 0
    FAILURE = 1
    USAGE = 2
    VALIDATION_FAILED = 3
    NO_CROSSING = 4
    NO_CONVERGENCE = 5
    SADDLE_VIOLATION = 6
    DEGENERATE_LIMIT = 7
    OUT_OF_RANGE = 8
    VERIFICATION_FAILED = 9


class KirchhoffError(Exception):
    """Base class of all package errors"""

    exit_code = ExitCode.FAILURE


# Validation
# ----------


class ValidationFailed(KirchhoffError):
    """Input data violates a documented invariant"""

    exit_code = ExitCode.VALIDATION_FAILED


class InvalidDomain(ValidationFailed):
    pass


class InvalidConfig(ValidationFailed):
    pass


class InvalidCoefficient(ValidationFailed):
    pass


class InvalidBranch(ValidationFailed):
    pass


class InvalidNonlinearity(ValidationFailed):
    pass


class DimensionMismatch(ValidationFailed):
    pass


# Branch evaluation
# -----------------


class BranchError(KirchhoffError):
    exit_code = ExitCode.OUT_OF_RANGE


class OutOfBranch(BranchError):
    """Argument t is not inside the open branch interval I"""


class OutOfRange(BranchError):
    """Value lambda is not attained by K on the branch"""


# Solvers
# -------


class NoConvergence(KirchhoffError):
    """Iteration limit reached before the tolerance was met"""

    exit_code = ExitCode.NO_CONVERGENCE

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class DegenerateLimit(KirchhoffError):
    """Monotone iteration collapsed towards the zero function"""

    exit_code = ExitCode.DEGENERATE_LIMIT


class NoCrossing(KirchhoffError):
    """The fixed-point equation has no root on the branch"""

    exit_code = ExitCode.NO_CROSSING

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SaddleViolation(KirchhoffError):
    """A sampled saddle inequality failed beyond the noise level"""

    exit_code = ExitCode.SADDLE_VIOLATION

    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst
