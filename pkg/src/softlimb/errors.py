"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Non-finite or out-of-domain numeric input."""


class ConfigError(ValueError):
    """Malformed or degenerate configuration."""


class UsageError(RuntimeError):
    """An object was used outside its lifecycle contract."""


class ShapeError(ValueError):
    """Array dimensions do not match what an operation expects."""


class MissingDataError(LookupError):
    """A required (algorithm, setting) cell has no records."""


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss or parameter."""
