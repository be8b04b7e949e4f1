"""Shared exception types."""


class ConfigurationError(ValueError):
    """A constant, option, or descriptor violates its documented constraints."""


class InsufficientDataError(ValueError):
    """An estimator was evaluated on too few samples (empty, or emptied by trimming)."""


class NoClosedFormError(RuntimeError):
    """The kernel/functional pair has no closed-form value; caller may fall back to sampling."""
