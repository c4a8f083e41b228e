"""Exception hierarchy shared by every fpsearch module."""


class FpSearchError(Exception):
    """Base class for all library errors."""


class DimensionError(FpSearchError, ValueError):
    """Fingerprints of different lengths were combined."""


class FoldError(FpSearchError, ValueError):
    """A fold level does not divide the fingerprint length."""


class ParameterError(FpSearchError, ValueError):
    """A numeric parameter is outside its valid range."""


class BuildError(FpSearchError, ValueError):
    """An index could not be built from the given database."""


class IndexStateError(FpSearchError, RuntimeError):
    """An operation is not supported by the index in its current state."""


class InsertError(FpSearchError, ValueError):
    """A graph insertion was rejected."""


class QueueUnderflow(FpSearchError, IndexError):
    """Dequeue from an empty priority queue."""


class FitError(FpSearchError, ValueError):
    """A distribution could not be fitted to the samples."""


class FormatError(FpSearchError, ValueError):
    """A serialized index file is malformed."""


class ParseError(FpSearchError, ValueError):
    """A fingerprint text file is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
