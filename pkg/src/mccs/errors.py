"""Exception types raised by the library."""


class MccsError(ValueError):
    pass


class InvalidInstanceError(MccsError):
    """Problem instance violates a model invariant."""


class InvalidPlacementError(MccsError):
    """Placement matrix has the wrong shape or violates a constraint."""


class EnumerationLimitError(MccsError):
    """Exhaustive enumeration would exceed the configured guard."""


class QuantizationError(MccsError):
    pass


class SolverError(MccsError):
    """LP solve did not reach an optimal solution."""

    def __init__(self, message: str, status=None):
        super().__init__(message)
        self.status = status
