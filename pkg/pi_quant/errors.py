class PiQuantError(Exception):
    """Base class for every error raised by the pi_quant package."""


class ConfigurationError(PiQuantError, ValueError):
    """A precision, optimizer or command-line setting is out of range."""


class DomainError(PiQuantError, ValueError):
    """A codec input lies outside the representable domain."""


class InputError(PiQuantError, ValueError):
    """A tensor or gradient is non-finite or has the wrong shape."""


class FormatError(PiQuantError, ValueError):
    """Encoded data (codes, payloads, files) is malformed."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class AcceptanceError(PiQuantError):
    """An empirical bound check failed."""
