"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Operands act on different Hilbert-space dimensions."""


class InvariantViolation(ValueError):
    """A constructed object failed one of its validity checks."""


class NumericalFailure(RuntimeError):
    """An integration or sampling step left the numerically trustworthy regime."""


class ConfigError(ValueError):
    """A scenario document is malformed; the message carries the JSON path."""
