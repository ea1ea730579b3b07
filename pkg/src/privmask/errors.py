"""Exception types raised by the design toolkit."""


class PrivmaskError(Exception):
    """Base class for all toolkit errors."""


class ModelError(PrivmaskError, ValueError):
    """The state-space model or an input file is malformed or violates an invariant."""


class LyapunovError(PrivmaskError, ArithmeticError):
    """The stationary covariance solve did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConditioningError(PrivmaskError, ArithmeticError):
    """A resolvent evaluation was too ill-conditioned to trust."""


class InfeasibleError(PrivmaskError, ValueError):
    """A design constraint cannot be met."""


class InfiniteLeakageError(PrivmaskError, ArithmeticError):
    """The leakage rate diverges (no noise at frequencies carrying signal)."""


class UndefinedEntropyError(PrivmaskError, ArithmeticError):
    """The conditional entropy rate is undefined because W is singular."""
