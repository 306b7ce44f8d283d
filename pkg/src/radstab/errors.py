"""Exception hierarchy.  Each class maps to a CLI exit code."""


class RadstabError(Exception):
    exit_code = 4


class DomainError(RadstabError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class HypothesisError(RadstabError):
    """A standing hypothesis on the nonlinearity or a theorem's assumption fails."""

    exit_code = 2


class PreconditionError(RadstabError):
    exit_code = 2


class RangeError(RadstabError, ValueError):
    """Bracketing or evaluation requested outside the covered range."""

    exit_code = 4


class AccuracyError(RadstabError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class StiffnessError(RadstabError):
    def __init__(self, message, r=None):
        super().__init__(message)
        self.r = r


class ConsistencyError(RadstabError):
    """Evidence contradicts a theorem-backed conclusion; flags a bug or bad tolerances."""

    exit_code = 3
