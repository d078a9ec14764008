from __future__ import annotations

from typing import Any


class WmonlabError(Exception):
    """Base class for every error raised by this package."""


class UnknownTask(WmonlabError, KeyError):
    pass


class NonMonotone(WmonlabError, ValueError):
    pass


class GluingViolation(WmonlabError, ValueError):
    pass


class UnboundedPayment(WmonlabError, ValueError):
    pass


class BadProbe(WmonlabError, ValueError):
    pass


class BadPerturbation(WmonlabError, ValueError):
    pass


class AssumptionViolated(WmonlabError):
    """The allocation never hands the t-player the empty bundle below the probe ceiling."""


class Undetermined(WmonlabError):
    pass


class InsufficientSamples(WmonlabError, ValueError):
    pass


class OutOfRange(WmonlabError, ValueError):
    pass


class TooLarge(WmonlabError, ValueError):
    pass


class DegenerateOptimum(WmonlabError, ZeroDivisionError):
    def __init__(self, message: str, mech_makespan: float | None = None):
        super().__init__(message)
        self.mech_makespan = mech_makespan


class BadParameters(WmonlabError, ValueError):
    pass


class FamilyMismatch(WmonlabError):
    pass


class Certificate(WmonlabError):
    """An error whose payload certifies a property of the mechanism under test."""

    kind = "certificate"

    def __init__(self, message: str, **payload: Any):
        super().__init__(message)
        self.payload = payload

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "message": str(self), **self.payload}


class NonMonotoneInOwnBid(Certificate):
    kind = "NonMonotoneInOwnBid"


class NonLinearBoundary(Certificate):
    kind = "NonLinearBoundary"


class WMONViolation(Certificate):
    kind = "WMONViolation"


class LinearityViolation(Certificate):
    """A reduction step saw an allocation change that no linear truthful mechanism makes."""

    kind = "LinearityViolation"
