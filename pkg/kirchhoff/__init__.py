"""Positive solutions of non-local Kirchhoff problems on a prescribed branch"""

# Module metadata
__author__ = "Daniel Andersson"
__maintainer__ = __author__
__email__ = "daniel.4ndersson@gmail.com"
__contact__ = __email__
__copyright__ = "Copyright (c) 2020 Daniel Andersson"
__license__ = "MIT"
__version__ = "0.1.0"

from .errors import (
    DegenerateLimit,
    ExitCode,
    KirchhoffError,
    NoConvergence,
    NoCrossing,
    OutOfBranch,
    OutOfRange,
    SaddleViolation,
    ValidationFailed,
)
