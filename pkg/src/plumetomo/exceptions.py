"""Exception hierarchy.

Every error derives from :class:`PlumeTomoError` and from ``ValueError`` so
callers that only care about bad input can catch the builtin.
"""


class PlumeTomoError(ValueError):
    """Base class for all package errors."""


class InvalidGridError(PlumeTomoError):
    pass


class DegenerateBeamError(PlumeTomoError):
    """Beam endpoints coincide (no path to integrate over)."""


class VerticalBeamError(DegenerateBeamError):
    """Beam has no horizontal extent, so it never crosses the plane's cells."""


class WindGapError(PlumeTomoError):
    """No wind sample close enough to the requested time."""


class SystemMismatchError(PlumeTomoError):
    """Field, row or system refer to incompatible grids or indices."""


class EmptySystemError(PlumeTomoError):
    """No beam intersects the reconstruction grid."""


class InsufficientDataError(PlumeTomoError):
    pass


class UndefinedArgmaxError(PlumeTomoError):
    pass


class FileFormatError(PlumeTomoError):
    """Malformed input file. ``lineno`` is 1-based, ``None`` when not tied to a line."""

    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}"
        if lineno is not None:
            where = f"{where}:{lineno}" if where else f"line {lineno}"
        super().__init__(f"{where}: {message}" if where else message)


class ParseError(FileFormatError):
    pass


class ValidationError(FileFormatError):
    pass
