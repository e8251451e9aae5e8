"""Exception hierarchy.

Every error raised on purpose by this package derives from :class:`ImcError`,
so callers can catch the whole family at once.
"""


class ImcError(Exception):
    """Base class for all package errors."""


class ValidationError(ImcError, ValueError):
    """A model violates a structural requirement.

    ``violations`` holds every problem found, not only the first one; the
    exception itself is the first entry.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [self]


class RowSumError(ValidationError):
    pass


class IntervalInfeasible(ValidationError):
    pass


class BoundOrderError(ValidationError):
    pass


class UnknownStateInTarget(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ParseError(ImcError):
    pass


class VertexExplosion(ImcError):
    pass


class TreeTooLarge(ImcError):
    pass


class SingularSystem(ImcError):
    pass


class NotConverged(ImcError):
    pass


class PolicyCycle(ImcError):
    pass


class WitnessVerificationFailed(ImcError):
    pass


class LambdaOutOfRange(ImcError, ValueError):
    pass


class PreconditionError(ImcError, ValueError):
    pass
