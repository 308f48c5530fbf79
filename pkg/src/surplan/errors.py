"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when a model object violates a structural invariant."""


class ContractError(ValueError):
    """Raised when an operation is called outside its stated preconditions."""


class ScenarioError(ValueError):
    """Raised when a scenario file is malformed or inconsistent."""


class LtlSyntaxError(ValueError):
    """Raised on malformed mission formula text.

    Carries the character offset of the offending token in ``position``.
    """

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


class MissionInfeasible(RuntimeError):
    """Raised when no infinite run of the system can satisfy the mission."""


class InternalConsistencyError(AssertionError):
    """Raised when a guaranteed structural property fails to hold.

    Seeing this error means a bug in the offline preparation, not bad input.
    """
