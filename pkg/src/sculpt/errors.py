"""Exception types shared across the toolkit.

The CLI maps ConfigError to exit code 2 and NumericError to exit code 3;
everything else is a bug and propagates.
"""


class SculptError(Exception):
    """Base class for all toolkit errors."""


class ContractViolationError(SculptError):
    """An operation was called with inputs violating its preconditions."""


class NumericError(SculptError):
    """A non-finite value showed up where finite math was required."""


class ConfigError(SculptError):
    """Invalid run configuration, unknown plugin, or hook-binding mismatch."""


class PipelineError(SculptError):
    """A run-level failure (missing capture, rendering failure, ...)."""
