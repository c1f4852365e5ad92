"""Exception types shared across the package."""


class DeepRefError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatchError(DeepRefError, ValueError):
    """An array has the wrong shape; the message names the offending axis."""


class NonFiniteError(DeepRefError, ValueError):
    """A NaN or Inf was found where only finite values are allowed."""


class FormatError(DeepRefError, ValueError):
    """A file (weights, dataset, sequence, PGM, RD curve) failed to parse."""


class ConfigError(DeepRefError, ValueError):
    """A configuration value or run-config document is invalid."""
