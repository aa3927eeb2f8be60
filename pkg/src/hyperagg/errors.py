"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(ValueError):
    """A value lies outside the mathematical domain of an operation."""


class ParameterError(ValueError):
    """An operation parameter (curvature, temperature, ...) is invalid."""


class ConfigurationError(ValueError):
    """A configuration file or object is malformed or inconsistent."""


class ValidationError(ValueError):
    """Runtime data violates a declared invariant (labels, attention rows, ...)."""


class BatchError(ValueError):
    """A batch is too small or otherwise unusable for the requested loss."""


class EvaluationError(RuntimeError):
    """A numerical evaluation produced non-finite values."""
