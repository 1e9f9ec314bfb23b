"""Clustering evaluation, a k-means baseline, and weighted least squares."""

import itertools
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, NumericalError

# Brute-force permutation matching is exact but factorial; past this many
# clusters the caller should switch to an assignment solver instead.
_MAX_BRUTE_FORCE_CLUSTERS = 8


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed as [true class, predicted class] after matching."""

    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True)
class WlsFit:
    """Weighted least-squares line y = beta0 + beta1 * x."""

    beta0: float
    beta1: float
    weights: np.ndarray


def _as_codes(labels):
    labels = np.asarray(labels).ravel()
    _, codes = np.unique(labels, return_inverse=True)
    return codes


def best_permutation_error(pred, true):
    """Minimal misclassification rate over relabelings of the prediction.

    Returns ``(error_rate, permutation, confusion)`` where ``permutation``
    maps predicted cluster codes to matched class codes and ``confusion``
    counts [true, matched prediction] pairs. More than eight clusters is
    rejected; a Hungarian assignment would be needed there.
    """
    pred = _as_codes(pred)
    true = _as_codes(true)
    if pred.shape != true.shape:
        raise InvalidInputError(
            f"label vectors differ in length: {pred.size} vs {true.size}"
        )
    k = int(max(pred.max(), true.max())) + 1
    if k > _MAX_BRUTE_FORCE_CLUSTERS:
        raise InvalidInputError(
            f"{k} clusters exceeds the brute-force limit of "
            f"{_MAX_BRUTE_FORCE_CLUSTERS}; use a Hungarian assignment instead"
        )
    best_err = None
    best_perm = None
    for perm in itertools.permutations(range(k)):
        mapped = np.asarray(perm)[pred]
        err = float(np.mean(mapped != true))
        if best_err is None or err < best_err:
            best_err, best_perm = err, perm
    mapped = np.asarray(best_perm)[pred]
    counts = np.zeros((k, k), dtype=int)
    np.add.at(counts, (true, mapped), 1)
    return best_err, best_perm, ConfusionMatrix(counts)


def within_cluster_ss(x, labels, centers=None):
    """Within-cluster sum of squared distances to cluster means."""
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    total = 0.0
    for j in np.unique(labels):
        rows = x[labels == j]
        center = rows.mean(axis=0) if centers is None else centers[j]
        total += float(((rows - center) ** 2).sum())
    return total


def kmeans(x, k, restarts=10, seed=0, max_iter=300):
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` runs.

    Deterministic for a given seed: restarts draw from one seeded
    generator and the winner is the lowest (WCSS, restart index) pair.
    Empty clusters are re-seeded from the point farthest from its current
    center.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise InvalidInputError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    best = None
    for restart in range(restarts):
        labels, wcss = _lloyd(x, k, rng, max_iter)
        if best is None or wcss < best[0]:
            best = (wcss, restart, labels)
    return best[2]


def _plus_plus_centers(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, ((x - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(x, k, rng, max_iter):
    centers = _plus_plus_centers(x, k, rng)
    labels = None
    prev_wcss = np.inf
    for _ in range(max_iter):
        dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist.argmin(axis=1)
        for j in range(k):
            members = new_labels == j
            if not members.any():
                farthest = dist[np.arange(x.shape[0]), new_labels].argmax()
                centers[j] = x[farthest]
                new_labels[farthest] = j
                members = new_labels == j
            centers[j] = x[members].mean(axis=0)
        wcss = within_cluster_ss(x, new_labels, centers)
        assert wcss <= prev_wcss * (1.0 + 1e-12) + 1e-9
        if labels is not None and np.array_equal(labels, new_labels):
            labels = new_labels
            break
        labels, prev_wcss = new_labels, wcss
    return labels, within_cluster_ss(x, labels)


def weighted_ls(x, y, w):
    """Fit y = beta0 + beta1 x minimizing the weighted squared residuals."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if not (x.shape == y.shape == w.shape):
        raise InvalidInputError("x, y and weights must have equal lengths")
    total = w.sum()
    if total <= 0.0:
        raise InvalidInputError("weights sum to zero")
    xbar = (w * x).sum() / total
    ybar = (w * y).sum() / total
    sxx = (w * (x - xbar) ** 2).sum() / total
    if sxx <= 1e-15 * max(1.0, xbar * xbar):
        raise NumericalError("weighted variance of x is zero; slope undefined")
    sxy = (w * (x - xbar) * (y - ybar)).sum() / total
    beta1 = sxy / sxx
    beta0 = ybar - beta1 * xbar
    return WlsFit(beta0=float(beta0), beta1=float(beta1), weights=w.copy())
