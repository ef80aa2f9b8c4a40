"""Exception types shared across the package."""


class EstimationError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(EstimationError):
    """Operands have incompatible shapes."""


class NotPositiveDefinite(EstimationError):
    """Matrix is not Hermitian positive definite."""


class RankDeficient(EstimationError):
    """A matrix does not have the rank the operation requires."""


class RankDeficientConstraints(RankDeficient):
    """Constraint matrix is not full row rank."""


class RankDeficientReducedModel(RankDeficient):
    """Measurement matrix restricted to the constraint nullspace loses column rank."""


class EmptyNullspace(EstimationError):
    """Constraint matrix has only the trivial nullspace."""


class SingularKktSystem(EstimationError):
    """Augmented stationarity system cannot be solved."""
