"""Exception classes shared across the package.

Each class maps to one failure category so callers (and the CLI exit-code
table) can tell configuration mistakes apart from runtime failures.
"""


class SmpcError(Exception):
    """Base class for all package errors."""


class ParameterError(SmpcError, ValueError):
    """A scalar parameter is out of its legal range (e.g. lambda <= 0)."""


class InputError(SmpcError, ValueError):
    """Rejected input data: wrong shape, non-finite entries, empty batch."""


class ConfigError(SmpcError, ValueError):
    """Invalid or inconsistent experiment configuration; names the key."""


class StepFailure(SmpcError, RuntimeError):
    """A controller step could not produce an action (e.g. every rollout failed)."""


class InvariantViolation(SmpcError, RuntimeError):
    """An internal invariant broke (e.g. covariance factorization failed)."""
