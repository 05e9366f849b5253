"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A caller-supplied parameter violates an operation's preconditions."""


class TruncationError(RuntimeError):
    """A certified series evaluation could not reach the requested tolerance."""


class InternalError(RuntimeError):
    """An internal consistency check failed (loop cap, certified bound violated)."""
