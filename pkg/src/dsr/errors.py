"""Exception types shared across the codec."""


class DSRError(Exception):
    """Base class for every error raised by this package."""


class FormatError(DSRError, ValueError):
    """Malformed file header, container or checkpoint."""


class UnsupportedFormatError(FormatError):
    """Well-formed input using a feature we do not handle (e.g. 16-bit PGM)."""


class TruncatedError(DSRError, EOFError):
    """Payload ended before the declared amount of data was read."""


class ConfigurationError(DSRError, ValueError):
    pass


class ShapeError(DSRError, ValueError):
    pass


class NumericalError(DSRError, ArithmeticError):
    """Non-finite values where finite ones are required (training divergence)."""
