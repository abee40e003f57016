"""Exception hierarchy shared by all evrep modules.

Everything that means "your data or arguments are bad" derives from
:class:`DataError` so the CLI can map it to a single exit code; plain
``OSError`` is left alone and signals an I/O failure.
"""

from __future__ import annotations


class EvrepError(Exception):
    """Base class for all evrep errors."""


class DataError(EvrepError):
    """Invalid data or arguments (CLI exit code 3)."""


# -- event stream / window ---------------------------------------------------

class OutOfBoundsError(DataError):
    """Event coordinate or timestamp outside the allowed domain."""


class EmptyInputError(DataError):
    """An operation that needs at least one event received none."""


class EmptyWindowError(DataError):
    """Window contains no events."""


# -- file ingest -------------------------------------------------------------

class BadMagicError(DataError):
    """File does not start with the expected magic bytes."""


class VersionUnsupportedError(DataError):
    """Container version not understood by this reader."""


class TruncatedRecordError(DataError):
    """File payload length is not a whole number of records."""


class BadHeaderError(DataError):
    """CSV header line does not match the required schema."""


class ParseError(DataError):
    """Malformed CSV row; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvalidNError(DataError):
    """Count argument must be a positive integer."""


class NoLabelInWindowError(DataError):
    """No label timestamp falls inside the window's event span."""


# -- representations ---------------------------------------------------------

class InvalidKError(DataError):
    """Slice count must be a positive integer."""


class EmptyCloudError(DataError):
    """Point cloud contains no points."""


class OutOfSpanError(DataError):
    """Timestamp outside the window's half-open time span."""


class BadDimsError(DataError):
    """Grid dimensions must be positive."""


class CapExceededError(DataError):
    """Dense voxel grid would exceed the configured cell cap."""


class ShapeMismatchError(DataError):
    """Tensor shapes are inconsistent."""


# -- pose codecs -------------------------------------------------------------

class BadAxisLengthError(DataError):
    """Heat-vector axis must have at least two bins."""


class BadSigmaError(DataError):
    """Gaussian width must be positive."""


class OutOfRangeError(DataError):
    """Coordinate falls outside the encodable grid."""


class EmptyVectorError(DataError):
    """Cannot decode an empty vector."""


# -- synthetic data ----------------------------------------------------------

class DegenerateTrackError(DataError):
    """Motion track needs at least two keyframes."""
