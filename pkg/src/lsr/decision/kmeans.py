"""K-means clustering of HOG descriptors (k-means++ seeding, Lloyd updates)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class ClusteringError(ValueError):
    """Exception raised when clustering cannot run on the given data."""

    pass


@dataclass
class KMeansModel:
    """Fitted centroids.

    Attributes:
        centroids: (k, d) cluster centers.
        iterations: Lloyd iterations actually run.
        inertia: Sum of squared distances to the assigned centroids.
    """

    centroids: np.ndarray
    iterations: int = 0
    inertia: float = 0.0

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    def assign(self, descriptors: np.ndarray) -> np.ndarray:
        """Nearest centroid per row; ties go to the lowest index."""
        points = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
        return np.argmin(cdist(points, self.centroids, "sqeuclidean"), axis=1)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(len(points)))]
    closest = cdist(points, points[chosen], "sqeuclidean")[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            pick = int(rng.choice(len(points), p=closest / total))
        else:
            pick = len(chosen) % len(points)
        chosen.append(pick)
        closest = np.minimum(closest, cdist(points, points[[pick]], "sqeuclidean")[:, 0])
    return points[chosen].copy()


def _update(points: np.ndarray, labels: np.ndarray, dist: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((k, points.shape[1]))
    np.add.at(sums, labels, points)
    centroids = sums / np.maximum(counts, 1)[:, None]

    empty = np.flatnonzero(counts == 0)
    if len(empty):
        # Reseed from the points farthest from their current centroid.
        own = dist[np.arange(len(points)), labels]
        farthest = np.argsort(-own, kind="stable")
        for cluster, point in zip(empty, farthest):
            centroids[cluster] = points[point]
    return centroids


def kmeans_fit(
    descriptors: np.ndarray,
    k: int = 8,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> KMeansModel:
    """Cluster descriptors into ``k`` groups.

    Raises:
        ClusteringError: If there are fewer descriptors than clusters.
    """
    points = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if k < 1:
        raise ClusteringError(f"k must be >= 1, got {k}")
    if len(points) < k:
        raise ClusteringError(f"{len(points)} samples cannot form {k} clusters")

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(points, k, rng)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        dist = cdist(points, centroids, "sqeuclidean")
        labels = np.argmin(dist, axis=1)
        updated = _update(points, labels, dist, k)
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if shift < tol:
            break

    dist = cdist(points, centroids, "sqeuclidean")
    inertia = float(dist.min(axis=1).sum())
    return KMeansModel(centroids=centroids, iterations=iterations, inertia=inertia)


def kmeans_assign(model: KMeansModel, descriptor: np.ndarray) -> int:
    """Index of the centroid nearest to one descriptor."""
    descriptor = np.asarray(descriptor, dtype=np.float64).ravel()
    if descriptor.size != model.dim:
        raise ClusteringError(f"descriptor has {descriptor.size} values, centroids have {model.dim}")
    return int(model.assign(descriptor[None])[0])
