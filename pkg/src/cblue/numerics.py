"""Dense complex linear algebra kernels.

Everything downstream funnels its matrix work through the helpers here:
Cholesky factorization of Hermitian positive definite matrices, triangular
solves against such factors, orthonormal nullspace bases, and least-norm
solutions of underdetermined systems.  All routines accept real input and
promote it to complex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatch,
    EmptyNullspace,
    NotPositiveDefinite,
    RankDeficientConstraints,
)

_EPS = float(np.finfo(np.float64).eps)
_HERMITIAN_RTOL = 1e-12


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce ``value`` to a read-only 2-D complex array with finite entries."""
    arr = np.array(value, dtype=np.complex128, order="C")
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"{name} must have at least one row and column")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


def as_vector(value, name: str = "vector") -> np.ndarray:
    """Coerce ``value`` to a read-only 1-D complex array with finite entries."""
    arr = np.array(value, dtype=np.complex128, order="C")
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise DimensionMismatch(f"{name} must have at least one entry")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


def hermitized(m: np.ndarray) -> np.ndarray:
    """Return the Hermitian part of ``m``; cleans up matmul roundoff."""
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True, eq=False)
class HpdFactor:
    """Lower-triangular Cholesky factor L with L @ L.conj().T equal to the input."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def solve(self, rhs):
        return hpd_solve(self, rhs)


def hpd_factor(m) -> HpdFactor:
    """Factor a Hermitian positive definite matrix as L @ L.conj().T.

    Parameters
    ----------
    m : array_like
        Square matrix, Hermitian up to a relative tolerance of 1e-12.

    Raises
    ------
    NotPositiveDefinite
        If ``m`` is not Hermitian or any Cholesky pivot falls at or below
        ``dim * eps * max(diag(m))``.
    """
    arr = as_matrix(m, "hpd matrix")
    n = arr.shape[0]
    if arr.shape[1] != n:
        raise DimensionMismatch(f"hpd matrix must be square, got {arr.shape}")
    scale = np.linalg.norm(arr)
    if np.linalg.norm(arr - arr.conj().T) > _HERMITIAN_RTOL * max(scale, np.finfo(float).tiny):
        raise NotPositiveDefinite("matrix is not Hermitian to relative tolerance 1e-12")
    try:
        lower = np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    pivots = np.square(lower.diagonal().real)
    threshold = n * _EPS * max(arr.diagonal().real.max(), 0.0)
    if (pivots <= threshold).any():
        raise NotPositiveDefinite(
            f"matrix is numerically semidefinite: pivot {pivots.min():.3e} "
            f"at or below threshold {threshold:.3e}"
        )
    lower = np.ascontiguousarray(lower)
    lower.flags.writeable = False
    return HpdFactor(lower=lower)


def hpd_solve(factor: HpdFactor, rhs):
    """Solve M @ X = rhs given the Cholesky factor of M.

    ``rhs`` may be a vector or a matrix of stacked right-hand-side columns;
    it is left unchanged.
    """
    arr = np.asarray(rhs, dtype=np.complex128)
    if arr.ndim not in (1, 2):
        raise DimensionMismatch(f"right-hand side must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] != factor.dim:
        raise DimensionMismatch(
            f"right-hand side has {arr.shape[0]} rows, factor dimension is {factor.dim}"
        )
    half = solve_triangular(factor.lower, arr, lower=True, check_finite=False)
    return solve_triangular(factor.lower, half, lower=True, trans="C", check_finite=False)


def default_rank_tol(singular_values: np.ndarray, shape: tuple[int, int]) -> float:
    """Rank cutoff ``max(shape) * eps * sigma_max`` used throughout the package."""
    largest = float(singular_values[0]) if singular_values.size else 0.0
    return max(shape) * _EPS * largest


def numerical_rank(m, rank_tol: float | None = None) -> int:
    """Numerical rank of ``m`` by singular value thresholding."""
    arr = as_matrix(m, "matrix")
    s = np.linalg.svd(arr, compute_uv=False)
    tol = default_rank_tol(s, arr.shape) if rank_tol is None else float(rank_tol)
    return int((s > tol).sum())


def nullspace_basis(a, rank_tol: float | None = None) -> np.ndarray:
    """Orthonormal basis for the nullspace of a full-row-rank matrix.

    Returns an ``n_cols x (n_cols - n_rows)`` matrix N with orthonormal
    columns satisfying ``a @ N = 0``.

    Raises
    ------
    RankDeficientConstraints
        If the numerical rank of ``a`` is below its row count.
    EmptyNullspace
        If the nullspace is trivial (square full-rank input).
    """
    arr = as_matrix(a, "constraint matrix")
    n_rows, n_cols = arr.shape
    _, s, vh = np.linalg.svd(arr)
    tol = default_rank_tol(s, arr.shape) if rank_tol is None else float(rank_tol)
    rank = int((s > tol).sum())
    if rank < n_rows:
        raise RankDeficientConstraints(
            f"constraint matrix has numerical rank {rank}, expected full row rank {n_rows}"
        )
    if rank == n_cols:
        raise EmptyNullspace("constraint matrix has only the trivial nullspace")
    basis = np.ascontiguousarray(vh[rank:].conj().T)
    basis.flags.writeable = False
    return basis


def least_norm_solution(a, b) -> np.ndarray:
    """Minimum-norm solution of ``a @ x = b`` for a full-row-rank ``a``."""
    arr = as_matrix(a, "constraint matrix")
    rhs = as_vector(b, "right-hand side")
    if rhs.shape[0] != arr.shape[0]:
        raise DimensionMismatch(
            f"right-hand side has {rhs.shape[0]} entries, constraint matrix has {arr.shape[0]} rows"
        )
    gram = hermitized(arr @ arr.conj().T)
    try:
        factor = hpd_factor(gram)
    except NotPositiveDefinite as exc:
        raise RankDeficientConstraints(
            "constraint matrix is numerically rank deficient"
        ) from exc
    return arr.conj().T @ hpd_solve(factor, rhs)
