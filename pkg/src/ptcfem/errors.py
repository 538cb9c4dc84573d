"""Exception hierarchy shared across the package."""


class PtcFemError(Exception):
    """Base class for all package errors."""


class SolverFailure(PtcFemError):
    """A linear solve did not produce a solution meeting its contract."""


class SingularFactorization(SolverFailure):
    pass


class IndefiniteMatrix(SolverFailure):
    """Conjugate gradients detected a non-positive curvature direction."""


class MaxIterationsExceeded(SolverFailure):
    pass


class NonConvergence(SolverFailure):
    """The adaptive loop hit its global iteration cap."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log


class DegenerateIncrement(PtcFemError):
    """The PTC increment vanished exactly (stationary iterate)."""


class NotApplicable(PtcFemError):
    pass


class UnsupportedDomain(PtcFemError):
    pass


class BoundaryFacet(PtcFemError):
    pass


class NonFiniteCoefficient(PtcFemError):
    pass


class MeshMismatch(PtcFemError):
    pass


class AncestryMismatch(PtcFemError):
    pass


class UnknownProblem(PtcFemError, KeyError):
    pass


class InsufficientData(PtcFemError):
    pass


class ConfigError(PtcFemError):
    pass
