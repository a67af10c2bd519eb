"""Exception types shared across the toolkit, plus CLI exit codes."""


class ResofiltError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ResofiltError):
    """Invalid configuration value; the message names the offending field."""


class ImageFormatError(ResofiltError):
    """Unreadable or unsupported image data."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(ResofiltError):
    """Singular system, rank deficiency, or another numeric failure."""


class ModelError(NumericError):
    """Ill-posed resonance model (coincident roots, empty spectrum, ...)."""


# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3
