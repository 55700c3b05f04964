"""Exception types shared across the package."""


class BohmdiffError(Exception):
    """Base class for all package-specific errors."""


class NodalSingularity(BohmdiffError):
    """Velocity or quantum potential requested where |psi| vanishes."""


class NoRoot(BohmdiffError):
    """No separator crossing exists on the requested ray."""


class XPointNotFound(BohmdiffError):
    """Newton search for the flow stagnation point diverged."""


class StepUnderflow(BohmdiffError):
    """ODE step size collapsed below the representable scale."""


class InvalidGrid(BohmdiffError):
    """Degenerate or empty initial-condition grid."""


class RegimeViolation(BohmdiffError):
    """Parameters outside the validity regime of an asymptotic formula."""


class DegenerateCell(BohmdiffError):
    """Interpolation cell with a vanishing Jacobian determinant."""


class InsufficientStatistics(BohmdiffError):
    """Too few weighted trajectories in the requested detector cone."""


class ParseError(BohmdiffError):
    """Scenario file could not be parsed."""


class ValidationError(BohmdiffError):
    """Scenario parsed but violates invariants."""
