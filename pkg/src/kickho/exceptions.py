"""Exception hierarchy shared by all kickho modules."""


class KickHOError(Exception):
    """Base class for every error raised by kickho."""


class DomainError(KickHOError, ValueError):
    """An argument lies outside the domain of the operation.

    ``field`` names the offending argument so drivers can report it.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NonResonantError(DomainError):
    """The kick period is not a rational fraction 1/q of the trap period."""


class InsufficientBasisError(KickHOError):
    """A state does not fit into the truncated Fock basis."""


class NumericError(KickHOError, ArithmeticError):
    """A linear-algebra step failed or produced out-of-tolerance results."""

    def __init__(self, message, context=None):
        if context:
            details = ", ".join(f"{k}={v!r}" for k, v in context.items())
            message = f"{message} ({details})"
        super().__init__(message)
        self.context = dict(context or {})
