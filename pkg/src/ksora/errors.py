"""Exception hierarchy shared by every module."""


class KsoraError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(KsoraError, ValueError):
    """Parameters are inconsistent with each other or with their input."""


class DimensionError(KsoraError, ValueError):
    """Array shapes do not satisfy an operation's precondition."""


class UndefinedMetricError(KsoraError, ValueError):
    """A metric is mathematically undefined for the given maps."""


class SizeError(KsoraError, ValueError):
    """Input exceeds a documented size cap."""


class CodecError(KsoraError):
    """A file could not be decoded or encoded.

    The message always names the file and, where meaningful, the byte offset.
    """

    def __init__(self, path, message, offset=None):
        self.path = str(path)
        self.offset = offset
        where = f"{self.path}" if offset is None else f"{self.path} @ byte {offset}"
        super().__init__(f"{where}: {message}")


class IngestionError(KsoraError):
    """A sequence bundle is malformed; carries the offending frame index."""

    def __init__(self, frame, message):
        self.frame = frame
        super().__init__(f"frame {frame}: {message}")
