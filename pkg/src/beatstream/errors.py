"""Exception types shared across the package."""


class BeatstreamError(ValueError):
    """Base class for beatstream-specific errors."""


class ConfigError(BeatstreamError):
    """Raised for invalid or inconsistent configuration values."""


class StreamFormatError(BeatstreamError):
    """Raised when an input stream or file cannot be decoded."""
