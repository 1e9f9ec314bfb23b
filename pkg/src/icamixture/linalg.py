"""Dense symmetric-matrix kernels used by whitening and orthogonalization.

All routines operate on small square matrices (dimension up to roughly 150)
and favor strict error reporting over silent regularization: a covariance
that is numerically rank-deficient raises rather than being clamped, so the
caller can decide to reduce dimension first.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateCovarianceError,
    InvalidInputError,
    NumericalError,
    SingularMatrixError,
)

# Eigenvalues below EIGEN_FLOOR * (largest eigenvalue) are treated as zero
# when a matrix must be inverted or square-rooted.
EIGEN_FLOOR = 1e-10


@dataclass(frozen=True)
class SymEigResult:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are sorted in descending order and ``eigenvectors``
    holds the matching orthonormal eigenvectors as columns, so that
    ``eigenvectors @ diag(eigenvalues) @ eigenvectors.T`` reconstructs the
    input.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_square_finite(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidInputError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return m


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrized defensively as (M + M^T)/2 before
    decomposition; callers are expected to pass matrices that are already
    symmetric to within roundoff.

    Raises
    ------
    InvalidInputError
        If the matrix is not square or has non-finite entries.
    NumericalError
        If the underlying eigensolver fails to converge.
    """
    m = _check_square_finite(m)
    sym = 0.5 * (m + m.T)
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    order = np.argsort(values)[::-1]
    return SymEigResult(values[order], vectors[:, order])


def spd_inv_sqrt(m):
    """Inverse symmetric square root N of an SPD matrix, N @ M @ N = I.

    Raises
    ------
    DegenerateCovarianceError
        If the smallest eigenvalue is at or below
        ``EIGEN_FLOOR * largest eigenvalue`` (the matrix is numerically
        rank-deficient); the offending eigenvalue is attached to the error.
    """
    eig = sym_eig(m)
    d = eig.eigenvalues
    if d[0] <= 0.0 or d[-1] <= EIGEN_FLOOR * d[0]:
        raise DegenerateCovarianceError(
            f"matrix is numerically degenerate (eigenvalue {d[-1]:.3e} vs "
            f"largest {d[0]:.3e}); consider PCA pre-reduction",
            eigenvalue=d[-1],
        )
    e = eig.eigenvectors
    return (e * (1.0 / np.sqrt(d))) @ e.T


def spd_sqrt(m):
    """Symmetric square root of an SPD matrix (same floor as spd_inv_sqrt)."""
    eig = sym_eig(m)
    d = eig.eigenvalues
    if d[0] <= 0.0 or d[-1] <= EIGEN_FLOOR * d[0]:
        raise DegenerateCovarianceError(
            f"matrix is numerically degenerate (eigenvalue {d[-1]:.3e} vs "
            f"largest {d[0]:.3e})",
            eigenvalue=d[-1],
        )
    e = eig.eigenvectors
    return (e * np.sqrt(d)) @ e.T


def invert(m):
    """Inverse of a well-conditioned square matrix.

    Raises SingularMatrixError when the singular-value ratio indicates the
    matrix is numerically singular (smallest/largest below 1e-12).
    """
    m = _check_square_finite(m)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-12 * sv[0]:
        raise SingularMatrixError(
            f"matrix is numerically singular (singular values {sv[-1]:.3e} "
            f"vs {sv[0]:.3e})"
        )
    return np.linalg.inv(m)


def determinant(m):
    """Determinant with the exact cofactor formula for sizes 1 and 2."""
    m = _check_square_finite(m)
    r = m.shape[0]
    if r == 1:
        return float(m[0, 0])
    if r == 2:
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    return float(np.linalg.det(m))


def log_abs_det(m):
    """log |det M|; -inf for exactly singular input."""
    m = _check_square_finite(m)
    sign, value = np.linalg.slogdet(m)
    if sign == 0.0:
        return -np.inf
    return float(value)
