"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
IOFailure -> 3.
"""


class IusegError(Exception):
    """Base class for all toolkit errors."""


class UsageError(IusegError):
    """Bad invocation or bad configuration value."""


class DataError(IusegError):
    """Structurally invalid input data (transcripts, manifests, spans...)."""


class ParseError(DataError):
    """Malformed transcript content, carrying the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class IOFailure(IusegError):
    """Missing files, unreadable audio, unwritable outputs."""
