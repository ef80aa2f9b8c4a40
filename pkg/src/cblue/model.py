"""Measurement model and linear equality constraints.

The observation model is ``y = H @ x + n`` with zero-mean noise of known
covariance, and the parameter vector is required to satisfy ``A @ x = b``.
The constraint set is re-expressed through an orthonormal nullspace basis N
and a particular solution, so that feasible vectors are exactly
``x = particular + N @ alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EstimationError, RankDeficientConstraints
from .numerics import (
    HpdFactor,
    as_matrix,
    as_vector,
    hpd_factor,
    least_norm_solution,
    nullspace_basis,
    numerical_rank,
)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Observation model ``y = H @ x + n`` with noise covariance ``C_nn``.

    ``C_nn`` must be Hermitian positive definite; its Cholesky factor is
    computed once at construction and reused by the estimators.
    """

    H: np.ndarray
    C_nn: np.ndarray
    noise_factor: HpdFactor = field(init=False, repr=False)

    def __post_init__(self):
        h = as_matrix(self.H, "measurement matrix")
        c = as_matrix(self.C_nn, "noise covariance")
        if c.shape[0] != c.shape[1]:
            raise DimensionMismatch(f"noise covariance must be square, got {c.shape}")
        if c.shape[0] != h.shape[0]:
            raise DimensionMismatch(
                f"noise covariance is {c.shape[0]}-dimensional but the model has "
                f"{h.shape[0]} measurements"
            )
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "C_nn", c)
        object.__setattr__(self, "noise_factor", hpd_factor(c))

    @property
    def n_y(self) -> int:
        return self.H.shape[0]

    @property
    def n_x(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Linear equality constraints ``A @ x = b``.

    ``A`` must have full row rank and strictly fewer rows than columns;
    violating either is a construction error.
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.A, "constraint matrix")
        rhs = as_vector(self.b, "constraint right-hand side")
        if rhs.shape[0] != a.shape[0]:
            raise DimensionMismatch(
                f"constraint right-hand side has {rhs.shape[0]} entries for "
                f"{a.shape[0]} constraint rows"
            )
        if a.shape[0] >= a.shape[1]:
            raise DimensionMismatch(
                f"constraints must leave degrees of freedom: got {a.shape[0]} rows "
                f"for {a.shape[1]} parameters"
            )
        if numerical_rank(a) < a.shape[0]:
            raise RankDeficientConstraints(
                "constraint matrix is not full row rank; remove redundant rows"
            )
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", rhs)

    @property
    def n_b(self) -> int:
        return self.A.shape[0]

    @property
    def n_x(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True, eq=False)
class NullspaceParam:
    """Feasible-set parameterization ``x = particular + basis @ alpha``."""

    basis: np.ndarray
    particular: np.ndarray
    n0: int = field(init=False)

    def __post_init__(self):
        basis = as_matrix(self.basis, "nullspace basis")
        particular = as_vector(self.particular, "particular solution")
        if particular.shape[0] != basis.shape[0]:
            raise DimensionMismatch(
                f"particular solution has {particular.shape[0]} entries, "
                f"basis has {basis.shape[0]} rows"
            )
        n0 = basis.shape[1]
        gram = basis.conj().T @ basis
        if np.linalg.norm(gram - np.eye(n0)) > 1e-10 * np.sqrt(n0):
            raise ValueError("nullspace basis columns must be orthonormal")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "particular", particular)
        object.__setattr__(self, "n0", n0)

    def point(self, alpha) -> np.ndarray:
        """Feasible vector for reduced coordinates ``alpha``."""
        alpha = np.asarray(alpha, dtype=np.complex128)
        return self.particular + self.basis @ alpha

    def coordinates(self, x) -> np.ndarray:
        """Reduced coordinates of a feasible vector ``x``."""
        x = np.asarray(x, dtype=np.complex128)
        return self.basis.conj().T @ (x - self.particular)


@dataclass(frozen=True)
class CompatibilityReport:
    """Which estimator forms a model/constraint pair admits."""

    direct_form: bool
    nullspace_form: bool
    reasons: tuple[str, ...] = ()


def validate(model: LinearModel, constraints: ConstraintSet) -> CompatibilityReport:
    """Check which constrained estimator forms are admissible.

    The direct form needs at least as many measurements as parameters and a
    full-column-rank measurement matrix.  The nullspace form only needs the
    measurement matrix restricted to the constraint nullspace to keep full
    column rank, so it also covers underdetermined models.
    """
    if constraints.n_x != model.n_x:
        raise DimensionMismatch(
            f"constraints act on {constraints.n_x} parameters, model has {model.n_x}"
        )
    reasons = []
    direct = True
    if model.n_y < model.n_x:
        direct = False
        reasons.append(
            f"direct form needs n_y >= n_x, got {model.n_y} measurements for "
            f"{model.n_x} parameters"
        )
    if numerical_rank(model.H) < model.n_x:
        direct = False
        reasons.append("measurement matrix is not full column rank")
    basis = nullspace_basis(constraints.A)
    reduced_ok = numerical_rank(model.H @ basis) == basis.shape[1]
    if not reduced_ok:
        reasons.append(
            "measurement matrix restricted to the constraint nullspace is not "
            "full column rank"
        )
    return CompatibilityReport(
        direct_form=direct, nullspace_form=reduced_ok, reasons=tuple(reasons)
    )


def parameterize(constraints: ConstraintSet, particular=None) -> NullspaceParam:
    """Build the nullspace parameterization of the constraint set.

    By default the particular solution is the least-norm one, which is
    orthogonal to the nullspace.  Any other feasible vector may be supplied;
    the constrained estimates do not depend on this choice.
    """
    basis = nullspace_basis(constraints.A)
    if particular is None:
        xp = least_norm_solution(constraints.A, constraints.b)
    else:
        xp = as_vector(particular, "particular solution")
        if xp.shape[0] != constraints.n_x:
            raise DimensionMismatch(
                f"particular solution has {xp.shape[0]} entries for "
                f"{constraints.n_x} parameters"
            )
        residual = np.linalg.norm(constraints.A @ xp - constraints.b)
        scale = (
            np.linalg.norm(constraints.A) * np.linalg.norm(xp)
            + np.linalg.norm(constraints.b)
            + np.finfo(float).tiny
        )
        if residual > 1e-8 * scale:
            raise EstimationError(
                "supplied particular solution does not satisfy the constraints"
            )
    return NullspaceParam(basis=basis, particular=xp)
