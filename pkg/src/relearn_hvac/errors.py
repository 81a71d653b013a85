"""Exception types shared across the package.

Every error raised on purpose derives from RelearnError so callers (and the
CLI exit-code mapping) can tell deliberate rejections from genuine bugs.
"""


class RelearnError(Exception):
    """Base class for all deliberate errors raised by this package."""


class ShapeError(RelearnError, ValueError):
    """An array argument has the wrong shape or an incompatible dimension."""


class InputError(RelearnError, ValueError):
    """An argument value is invalid (empty sequence, non-finite action, ...)."""


class SchemaError(RelearnError, ValueError):
    """A CSV or checkpoint is missing a required column/field."""


class IntegrityError(RelearnError, ValueError):
    """Timestamps or values violate a dataset integrity rule."""


class ConfigurationError(RelearnError, ValueError):
    """A configuration value is out of range or inconsistent."""


class NumericError(RelearnError, ArithmeticError):
    """A NaN or overflow surfaced where finite values are required."""


class UndefinedMetricError(RelearnError, ValueError):
    """A metric is mathematically undefined for the given inputs."""


class UsageError(RelearnError, RuntimeError):
    """An API was called in an invalid order (e.g. stepping a done episode)."""
