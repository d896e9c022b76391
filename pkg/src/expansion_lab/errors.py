"""Exception hierarchy shared by every module."""


class ExpansionLabError(Exception):
    """Base class for all library errors."""


class InvalidWordError(ExpansionLabError, ValueError):
    pass


class OrbitLengthError(ExpansionLabError, ValueError):
    pass


class DegenerateDerivativeError(ExpansionLabError, ArithmeticError):
    pass


class ParameterError(ExpansionLabError, ValueError):
    pass


class InvariantViolation(ExpansionLabError, ValueError):
    """A map or system fails one of its load-time checks."""

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class PreconditionError(ExpansionLabError, ValueError):
    pass


class ReduceDeltaError(ExpansionLabError, ValueError):
    """The pulled-back ball does not fit inside a single inverse branch."""

    def __init__(self, message, max_delta):
        super().__init__(f"{message} (largest feasible delta ~ {max_delta:.6g})")
        self.max_delta = max_delta


class CoverIncompleteError(ExpansionLabError, ValueError):
    pass


class InfeasibleExampleError(ExpansionLabError, ValueError):
    def __init__(self, condition, message):
        super().__init__(f"condition {condition}: {message}")
        self.condition = condition


class ExampleInvalidError(ExpansionLabError, RuntimeError):
    pass
