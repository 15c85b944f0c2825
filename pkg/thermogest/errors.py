"""
The errors raised by `thermogest`.

Every domain error carries an `exit_code` which the command line tool
returns when the error reaches it: `1` for usage and configuration errors,
`2` for data errors, and `3` for numerical failures.

>>> ConfigError("x").exit_code
1
>>> TruncatedError("x").exit_code
2
>>> TruncatedError("x").error_code
'truncated'
>>> NumericError("x").exit_code
3
"""
from typing import Final

#: the exit code for success
EXIT_OK: Final[int] = 0
#: the exit code for usage or configuration errors
EXIT_CONFIG: Final[int] = 1
#: the exit code for data errors
EXIT_DATA: Final[int] = 2
#: the exit code for numerical failures
EXIT_NUMERIC: Final[int] = 3


class ConfigError(ValueError):
    """A configuration, usage, or shape mismatch error."""

    #: the exit code of the command line tool
    exit_code: int = EXIT_CONFIG


class DataError(ValueError):
    """An error in the data or in a file."""

    #: the exit code of the command line tool
    exit_code: int = EXIT_DATA
    #: the error code identifying the kind of data error
    error_code: str = "data"


class BadMagicError(DataError):
    """A file does not start with the expected magic bytes."""

    error_code = "bad-magic"


class VersionMismatchError(DataError):
    """A file has an unsupported format version."""

    error_code = "version"


class TruncatedError(DataError):
    """A file ends before its payload is complete."""

    error_code = "truncated"


class InfeasibleTargetError(DataError):
    """A target sequence cannot be aligned to the given number of frames."""

    error_code = "infeasible-target"


class SkipSample(DataError):  # noqa: N818
    """A sample cannot be augmented and must be skipped."""

    error_code = "skip-sample"


class InconclusiveProbeError(DataError):
    """A dependency probe window is too short for the receptive field."""

    error_code = "inconclusive-probe"


class NumericError(ArithmeticError):
    """A numerical failure, e.g., NaN inputs, gradients, or losses."""

    #: the exit code of the command line tool
    exit_code: int = EXIT_NUMERIC
