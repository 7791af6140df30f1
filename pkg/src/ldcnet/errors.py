"""Exception types shared across the package."""


class LdcnetError(Exception):
    """Base class for all package errors."""


class ShapeError(LdcnetError):
    """Tensor extents are incompatible with the requested operation."""


class ConfigError(LdcnetError):
    """A configuration value is out of its legal range."""


class DomainError(LdcnetError):
    """Input values violate a mathematical precondition (sign, range, size)."""


class FormatError(LdcnetError):
    """A file does not conform to its declared on-disk format."""


class DataError(LdcnetError):
    """A dataset or manifest is missing, empty, or inconsistent."""


class IoError(LdcnetError):
    """A filesystem operation failed."""


class OptimError(LdcnetError):
    """Optimizer state is inconsistent (e.g. missing gradients)."""


class NoValidPixels(LdcnetError):
    """A masked reduction was requested over an empty valid set."""
