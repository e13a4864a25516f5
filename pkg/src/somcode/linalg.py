"""Dense linear-algebra backbone.

Thin, contract-checked wrappers around LAPACK (via numpy): symmetric
eigendecomposition, PSD matrix square root with an eigenvalue floor,
regularized SPD solves, truncated SVD and the trace norm. Everything is
float64, deterministic for identical inputs, and free of shared state, so
all functions are safe to call concurrently.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import (
    IndefiniteMatrixError,
    NonFiniteError,
    NonSymmetricError,
    RankOutOfRangeError,
    SingularSystemError,
)

SYM_TOL = 1e-10
RESIDUAL_TOL = 1e-8


class SymEigResult(NamedTuple):
    """Eigenpairs of a symmetric matrix, eigenvalues sorted descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # orthonormal columns, one per eigenvalue


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce to a finite float64 2-D array, raising NonFiniteError otherwise."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise NonFiniteError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return m


def _require_square_symmetric(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise NonSymmetricError(f"{name} must be square, got {m.shape}")
    asym = np.linalg.norm(m - m.T)
    if asym > SYM_TOL * max(1.0, np.linalg.norm(m)):
        raise NonSymmetricError(
            f"{name} asymmetry {asym:.3e} exceeds relative tolerance {SYM_TOL:g}"
        )


def sym_eig(m) -> SymEigResult:
    """Eigendecomposition of a symmetric matrix.

    Returns eigenvalues in descending order with matching orthonormal
    eigenvector columns; reconstruction V diag(w) V^T matches the input to
    1e-8 relative.
    """
    m = as_matrix(m, "sym_eig input")
    _require_square_symmetric(m, "sym_eig input")
    # symmetrize so round-off asymmetry cannot leak into LAPACK
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(w)[::-1]
    return SymEigResult(np.ascontiguousarray(w[order]), np.ascontiguousarray(v[:, order]))


def psd_sqrt(m, floor: float = 0.0) -> np.ndarray:
    """Symmetric PSD square root, L @ L ~= m.

    Eigenvalues of the result are floored at ``floor`` so a subsequent
    inversion is safe even when ``m`` is rank deficient. Eigenvalues of
    ``m`` below -1e-8*trace(m) raise IndefiniteMatrixError; small negative
    round-off is clamped to zero.
    """
    m = as_matrix(m, "psd_sqrt input")
    _require_square_symmetric(m, "psd_sqrt input")
    if floor < 0:
        raise NonFiniteError("eigenvalue floor must be >= 0")
    w, v = sym_eig(m)
    neg_tol = 1e-8 * max(float(np.trace(m)), 0.0)
    if w[-1] < -neg_tol:
        raise IndefiniteMatrixError(
            f"eigenvalue {w[-1]:.6e} below clamp threshold {-neg_tol:.3e}"
        )
    roots = np.maximum(np.sqrt(np.maximum(w, 0.0)), floor)
    return (v * roots) @ v.T


def psd_sqrt_pinv(m, cutoff: float) -> np.ndarray:
    """Pseudo-inverse of the PSD square root of ``m``.

    Eigen-directions whose square-rooted eigenvalue falls at or below
    ``cutoff`` contribute zero (standard rank-tolerance pseudo-inversion)
    rather than 1/cutoff. Built from one eigendecomposition of ``m`` so the
    result is symmetric to machine precision and consistent with
    psd_sqrt(m, cutoff) on the retained directions.
    """
    m = as_matrix(m, "psd_sqrt_pinv input")
    _require_square_symmetric(m, "psd_sqrt_pinv input")
    if cutoff < 0:
        raise NonFiniteError("cutoff must be >= 0")
    w, v = sym_eig(m)
    neg_tol = 1e-8 * max(float(np.trace(m)), 0.0)
    if w[-1] < -neg_tol:
        raise IndefiniteMatrixError(
            f"eigenvalue {w[-1]:.6e} below clamp threshold {-neg_tol:.3e}"
        )
    roots = np.sqrt(np.maximum(w, 0.0))
    inv = np.where(roots > cutoff, np.divide(1.0, roots, where=roots > 0,
                                             out=np.zeros_like(roots)), 0.0)
    out = (v * inv) @ v.T
    return 0.5 * (out + out.T)


def ridge_solve(m, rhs, eps: float = 0.0) -> np.ndarray:
    """Solve (m + eps*I) z = rhs for a symmetric PSD m.

    The residual must satisfy ||(m + eps*I) z - rhs||_F <= 1e-8 *
    max(1, ||rhs||_F), else SingularSystemError is raised.
    """
    m = as_matrix(m, "ridge_solve matrix")
    rhs_arr = np.asarray(rhs, dtype=np.float64)
    squeeze = rhs_arr.ndim == 1
    rhs2 = as_matrix(rhs_arr, "ridge_solve rhs")
    _require_square_symmetric(m, "ridge_solve matrix")
    if rhs2.shape[0] != m.shape[0]:
        raise NonFiniteError(
            f"rhs rows {rhs2.shape[0]} do not conform with matrix size {m.shape[0]}"
        )
    a = m + eps * np.eye(m.shape[0])
    try:
        z = np.linalg.solve(a, rhs2)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    residual = np.linalg.norm(a @ z - rhs2)
    if not np.isfinite(residual) or residual > RESIDUAL_TOL * max(1.0, np.linalg.norm(rhs2)):
        raise SingularSystemError(
            f"residual {residual:.3e} above tolerance; system is numerically singular"
        )
    return z[:, 0] if squeeze else z


def trunc_svd(m, r: int) -> np.ndarray:
    """Best rank-r approximation via the top-r singular triplets.

    When r == min(rows, cols) the input is returned unchanged (the best
    approximation of full rank is the matrix itself), keeping the identity
    exact down to the bit level.
    """
    m = as_matrix(m, "trunc_svd input")
    r_max = min(m.shape)
    if not 1 <= r <= r_max:
        raise RankOutOfRangeError(f"rank {r} outside [1, {r_max}] for shape {m.shape}")
    if r == r_max:
        return m.copy()
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return (u[:, :r] * s[:r]) @ vt[:r]


def trace_norm(m) -> float:
    """Sum of singular values."""
    m = as_matrix(m, "trace_norm input")
    return float(np.linalg.svd(m, compute_uv=False).sum())
