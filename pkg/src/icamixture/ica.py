"""Weighted FastICA: centering, whitening, and the symmetric fixed point.

Every moment here is weighted by per-observation responsibilities and
divides by the sum of the weights, never by the number of rows, so the
routines apply unchanged whether weights are posteriors or all ones.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import (
    DegenerateCovarianceError,
    EmptyComponentError,
    FitWarning,
    InvalidInputError,
    NumericalError,
)


@dataclass(frozen=True)
class Nonlinearity:
    """Contrast nonlinearity for the fixed-point update.

    ``logcosh`` uses g(y) = tanh(alpha1 * y) with alpha1 in [1, 2];
    ``gauss`` uses g(y) = y * exp(-y^2 / 2).
    """

    kind: str = "logcosh"
    alpha1: float = 1.0

    def __post_init__(self):
        if self.kind not in ("logcosh", "gauss"):
            raise InvalidInputError(f"unknown nonlinearity {self.kind!r}")
        if self.kind == "logcosh" and not 1.0 <= self.alpha1 <= 2.0:
            raise InvalidInputError(
                f"logcosh alpha1 must be in [1, 2], got {self.alpha1}"
            )


@dataclass(frozen=True)
class Whitening:
    """Weighted whitening transform: z = V (x - mean)."""

    mean: np.ndarray
    v: np.ndarray
    v_inv: np.ndarray


@dataclass(frozen=True)
class Unmixing:
    """Result of the symmetric fixed-point iteration.

    ``w`` has orthonormal rows; ``a_inv = w @ v`` recovers sources from
    centered data and ``a = v_inv @ w.T`` is the estimated mixing matrix.
    ``converged`` is False when the iteration stopped at the sweep cap,
    which is expected for (near-)Gaussian coordinates.
    """

    w: np.ndarray
    a_inv: np.ndarray
    a: np.ndarray
    inner_iters: int
    converged: bool = True


def weighted_center(x, w):
    """Remove the weighted mean; returns (centered rows, mean)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float).ravel()
    total = w.sum()
    if total <= 0.0:
        raise EmptyComponentError("weights sum to zero; component is empty")
    mean = (x * w[:, None]).sum(axis=0) / total
    return x - mean, mean


def weighted_covariance(x_centered, w):
    """Weighted second-moment matrix sum_i w_i x_i x_i^T / sum_i w_i."""
    w = np.asarray(w, dtype=float).ravel()
    total = w.sum()
    if total <= 0.0:
        raise EmptyComponentError("weights sum to zero; component is empty")
    return (x_centered.T * w) @ x_centered / total


def weighted_whiten(x_centered, w):
    """Whiten centered data under weights: returns (z, Whitening).

    The transform is the symmetric inverse square root of the weighted
    covariance, so the weighted covariance of ``z`` is the identity.
    The returned Whitening carries a zero mean; callers that centered the
    data themselves substitute the real mean.
    """
    x_centered = np.asarray(x_centered, dtype=float)
    cov = weighted_covariance(x_centered, w)
    eig = linalg.sym_eig(cov)
    d = eig.eigenvalues
    if d[0] <= 0.0 or d[-1] <= linalg.EIGEN_FLOOR * d[0]:
        raise DegenerateCovarianceError(
            f"weighted covariance is rank-deficient (eigenvalue {d[-1]:.3e} "
            f"vs largest {d[0]:.3e}); reduce dimension with PCA first",
            eigenvalue=d[-1],
        )
    e = eig.eigenvectors
    v = (e * (1.0 / np.sqrt(d))) @ e.T
    v_inv = (e * np.sqrt(d)) @ e.T
    z = x_centered @ v.T
    return z, Whitening(mean=np.zeros(x_centered.shape[1]), v=v, v_inv=v_inv)


def g_and_gprime(nl, y):
    """Evaluate the contrast function and its derivative elementwise."""
    y = np.asarray(y, dtype=float)
    if nl.kind == "logcosh":
        g = np.tanh(nl.alpha1 * y)
        gp = nl.alpha1 * (1.0 - g * g)
    else:
        e = np.exp(-0.5 * y * y)
        g = y * e
        gp = (1.0 - y * y) * e
    return g, gp


def fixed_point(z, w, nl=Nonlinearity(), tau=1e-4, max_inner=100,
                w_init=None, whitening=None):
    """Symmetric-orthogonalization FastICA on whitened, weighted data.

    Each sweep updates every row i of W as

        w_i <- sum_n z_n g(w_i . z_n) p_n / sum_n p_n
               - w_i * sum_n g'(w_i . z_n) p_n / sum_n p_n

    and then re-orthonormalizes W <- (W W^T)^{-1/2} W. Rows are direction
    estimates (w and -w describe the same coordinate), and the update may
    alternate a converged row's sign between sweeps, so the stopping rule
    is sign-invariant: stop once max_i ||w_i_prev . w_i_curr| - 1| <= tau,
    or after ``max_inner`` sweeps. The last iterate is returned either way
    with ``converged`` recording which happened.

    When ``whitening`` is supplied, the returned Unmixing composes it into
    ``a_inv = W V`` and ``a = V^{-1} W^{-1}``; otherwise V is taken to be
    the identity.
    """
    z = np.asarray(z, dtype=float)
    w_vec = np.asarray(w, dtype=float).ravel()
    total = w_vec.sum()
    if total <= 0.0:
        raise EmptyComponentError("weights sum to zero; component is empty")
    r = z.shape[1]
    cur = np.eye(r) if w_init is None else np.array(w_init, dtype=float)
    if cur.shape != (r, r):
        raise InvalidInputError(f"w_init must be {r}x{r}, got {cur.shape}")
    cur = _sym_orth(cur)

    converged = False
    sweeps = 0
    for sweeps in range(1, max_inner + 1):
        prev = cur
        y = z @ cur.T
        g, gp = g_and_gprime(nl, y)
        first = (g * w_vec[:, None]).T @ z / total
        second = (gp * w_vec[:, None]).sum(axis=0) / total
        update = first - second[:, None] * prev
        # A vanishing update row means that direction is stationary under
        # the contrast (a near-Gaussian coordinate); its direction is then
        # undefined by the formula, so the previous row is retained.
        norms = np.linalg.norm(update, axis=1)
        collapsed = norms <= 1e-6 * max(norms.max(), 1e-300)
        if np.any(collapsed):
            update[collapsed] = prev[collapsed]
        cur = _sym_orth(update)
        drift = np.abs(np.abs((prev * cur).sum(axis=1)) - 1.0).max()
        if drift <= tau:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"fixed-point iteration hit the sweep cap ({max_inner}) without "
            f"meeting tolerance {tau:g}; sources may be near-Gaussian",
            FitWarning,
            stacklevel=2,
        )
    cur = _sym_orth(cur)

    if whitening is None:
        a_inv, a = cur.copy(), cur.T.copy()
    else:
        a_inv = cur @ whitening.v
        a = whitening.v_inv @ cur.T
    return Unmixing(w=cur, a_inv=a_inv, a=a, inner_iters=sweeps,
                    converged=converged)


def _sym_orth(w):
    gram = w @ w.T
    try:
        return linalg.spd_inv_sqrt(gram) @ w
    except DegenerateCovarianceError as exc:
        raise NumericalError(
            f"W W^T became singular during symmetric orthogonalization: {exc}"
        ) from exc


def ica_transform(x, mean, a_inv):
    """Apply the recovering map x -> A^{-1} (x - mean) row-wise."""
    return (np.asarray(x, dtype=float) - mean) @ np.asarray(a_inv).T


def amari_distance(p):
    """Amari index of a square matrix, normalized to [0, 1].

    Zero exactly when ``p`` is a scaled permutation; rows or columns that
    are entirely zero are rejected.
    """
    p = np.abs(np.asarray(p, dtype=float))
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InvalidInputError(f"matrix must be square, got shape {p.shape}")
    r = p.shape[0]
    row_max = p.max(axis=1)
    col_max = p.max(axis=0)
    if np.any(row_max == 0.0) or np.any(col_max == 0.0):
        raise InvalidInputError("matrix has an all-zero row or column")
    rows = (p.sum(axis=1) / row_max - 1.0).sum()
    cols = (p.sum(axis=0) / col_max - 1.0).sum()
    if r == 1:
        return 0.0
    return float((rows + cols) / (2.0 * r * (r - 1.0)))
