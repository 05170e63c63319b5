"""Exception types shared across the package."""


class FreqAdaptError(Exception):
    """Base class for all package errors."""


class ShapeError(FreqAdaptError, ValueError):
    pass


class NumericalError(FreqAdaptError, FloatingPointError):
    """A non-finite value appeared during evaluation or training."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class InternalError(FreqAdaptError, RuntimeError):
    pass


class AdaptError(FreqAdaptError):
    """Frequency selection or network rebuilding could not proceed."""


class ConfigError(FreqAdaptError, ValueError):
    pass


class FormatError(FreqAdaptError, ValueError):
    """A checkpoint or CSV file is malformed or has an unknown version."""
