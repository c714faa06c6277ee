"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class RadonError(ValueError):
    """Base class for every error raised by :mod:`mixradon`."""


class NonPositivePoint(RadonError):
    pass


class DivergentAtZero(RadonError):
    """The integrand is not locally integrable near the origin."""


class DivergentTail(RadonError):
    """The tail integral at infinity diverges."""


class InsufficientSmoothness(RadonError):
    pass


class ExistenceViolation(RadonError):
    """A transform does not exist (in the Lebesgue sense) for the given input."""


class ForbiddenOrder(RadonError):
    pass


class OrderOutOfRange(RadonError):
    pass


class OutOfRangeLambda(RadonError):
    pass


class DimsViolation(RadonError):
    pass


class BudgetExhausted(RadonError):
    pass


class OddField(RadonError):
    pass


class ExtrapolationDiverged(RadonError):
    pass


class PoleSingularity(RadonError):
    pass


class ClassViolation(RadonError):
    pass


class InterpolationGap(RadonError):
    pass
