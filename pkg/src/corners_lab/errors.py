"""Exception types shared across the library."""


class PreconditionError(ValueError):
    """An operation's stated precondition was violated.

    Carries the measured quantity that failed the check, so callers can
    report it instead of guessing.
    """

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class ConstantsInfeasibleError(RuntimeError):
    """The construction promised by a proof did not materialize at the
    configured constants.

    Distinct from :class:`PreconditionError`: the inputs were valid, but
    the search for a witness came up empty at desk scale.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class BudgetExhaustedError(RuntimeError):
    """A bounded search ran out of its node/time budget before certifying
    optimality."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
