"""Exception types shared across the package.

The CLI maps each family to its own exit code, so keep user-facing
failures inside this hierarchy.
"""


class DevnetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DevnetError):
    """Invalid configuration: bad option values, inconsistent settings."""


class DataError(DevnetError):
    """Problems with input data: unreadable files, bad schemas, degenerate inputs."""


class NumericError(DevnetError):
    """Numeric failure during training or scoring (divergence, guard trips)."""
