"""Lloyd's K-means with k-means++ seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["KMeansResult", "kmeans", "nearest_centroid"]


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray  # (k, d)
    labels: np.ndarray
    inertia: float
    history: tuple[float, ...]  # within-cluster sum of squares after each assignment
    iterations: int


def nearest_centroid(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid per row; ties go to the lowest index."""
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _lloyd(X, centroids, max_iter):
    history = []
    labels = nearest_centroid(X, centroids)
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(len(centroids)):
            members = labels == j
            if members.any():
                centroids[j] = X[members].mean(axis=0)
        history.append(float(((X - centroids[labels]) ** 2).sum()))
        new_labels = nearest_centroid(X, centroids)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    inertia = float(((X - centroids[labels]) ** 2).sum())
    return centroids, labels, inertia, history, it


def kmeans(X, k: int, rng: np.random.Generator, max_iter: int = 300, n_init: int = 1) -> KMeansResult:
    """Cluster rows of ``X`` into ``k`` groups; the best of ``n_init`` runs is kept.

    Iteration stops when the assignment no longer changes.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(X) < k:
        raise ValueError(f"need at least k={k} points, got {len(X)}")
    best = None
    for _ in range(n_init):
        centroids, labels, inertia, history, it = _lloyd(X, _plus_plus(X, k, rng), max_iter)
        if best is None or inertia < best.inertia:
            best = KMeansResult(centroids, labels, inertia, tuple(history), it)
    return best
