"""
Errors raised by the sheath toolkit.

Everything derives from SheathKitError so callers (the CLI, the report viewer)
can catch one type and map it to an exit code or a message.
"""


class SheathKitError(Exception):
    """Base class for every toolkit error."""


class InvalidConfig(SheathKitError, ValueError):
    """A parameter set or file violates its documented preconditions."""


class QuadratureFailure(SheathKitError):
    """An adaptive quadrature did not reach the requested tolerance."""


class NotSolvable(SheathKitError):
    """No monotone stationary sheath exists for the requested parameters."""

    def __init__(self, reason, message=None):
        self.reason = reason
        super().__init__(message or f"no stationary solution ({reason})")


class BohmViolated(NotSolvable):
    """The Bohm integral K is not below one."""

    def __init__(self, K):
        self.K = float(K)
        super().__init__("BohmViolated", f"Bohm criterion violated: K = {self.K:.6g} >= 1")


class NewtonDiverged(SheathKitError):
    def __init__(self, residual, iterations):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"Newton iteration failed after {self.iterations} iterations "
            f"(last residual {self.residual:.3e})"
        )


class BarrierViolated(SheathKitError):
    """The potential left the explicit barriers of the maximum principle."""


class WeightOverflow(SheathKitError):
    """A nonzero perturbation sits where the Maxwellian weight underflows."""


class DegenerateSeries(SheathKitError):
    """A norm series contains zeros or non-finite values inside the fit window."""


class NotFound(SheathKitError):
    def __init__(self, best_margin, message=None):
        self.best_margin = float(best_margin)
        super().__init__(message or f"no admissible constants found (best margin {self.best_margin:.6g})")


class VelocityGridClipped(UserWarning):
    """Mass reached the edge of the velocity grid and may have been clipped."""
