"""Exception types shared across the package."""


class DpgnnError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DpgnnError):
    """Malformed user input: bad edge indices, missing files, invalid labels."""


class ShapeError(DpgnnError):
    """Dimension mismatch between operands, naming the offending operation."""


class NumericError(DpgnnError):
    """Non-finite value where a finite one is required (losses, gradients, norms)."""


class ConfigError(DpgnnError):
    """Invalid experiment configuration (unknown keys, out-of-range values)."""
