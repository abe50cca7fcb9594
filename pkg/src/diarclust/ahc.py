"""Agglomerative hierarchical clustering with centroid linkage (UPGMC).

Clusters are merged bottom-up by minimum cosine distance between their
centroids, where each centroid is the plain arithmetic mean of the member
vectors (no re-normalization). Two stopping rules are provided:

* threshold stopping merges while the minimum inter-centroid distance does
  not exceed a configured value;
* the alternative stopping criterion (``ahc_asc``) ignores the distance
  threshold and stops right before the first merge in which both operands
  already exceed the minimum cluster size.

A post-processing pass (``apply_mcs``) dissolves clusters smaller than the
minimum cluster size into the nearest large cluster by centroid distance.

Determinism: among equidistant cluster pairs the lexicographically
smallest index pair merges first, and centroid distances within 1e-12 of
zero are treated as exactly zero so duplicate vectors always merge at a
zero threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_ZERO_DISTANCE_EPS = 1e-12


@dataclass(frozen=True)
class AhcConfig:
    """Clustering knobs: cosine distance threshold, minimum cluster size, stopping rule."""

    distance_threshold: float = 0.6
    min_cluster_size: int = 2
    stopping: str = "threshold"

    def __post_init__(self) -> None:
        if not 0.0 <= self.distance_threshold <= 2.0:
            raise ValidationError(
                f"distance_threshold must be in [0, 2], got {self.distance_threshold}"
            )
        if self.min_cluster_size < 1:
            raise ValidationError(f"min_cluster_size must be >= 1, got {self.min_cluster_size}")
        if self.stopping not in ("threshold", "asc"):
            raise ValidationError(f"stopping must be 'threshold' or 'asc', got {self.stopping!r}")


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    """Global cluster labels with centroids, per-cluster priors, and the
    inferred cluster count.

    Labels are contiguous in [0, num_clusters), every cluster is non-empty,
    and centroid g is the arithmetic mean of its member vectors.
    """

    labels: np.ndarray
    centroids: np.ndarray
    priors: np.ndarray
    num_clusters: int

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64)
        centroids = np.array(self.centroids, dtype=np.float64)
        priors = np.array(self.priors, dtype=np.float64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a non-empty 1-D array")
        if self.num_clusters < 1:
            raise ValidationError(f"num_clusters must be >= 1, got {self.num_clusters}")
        if labels.min() < 0 or labels.max() >= self.num_clusters:
            raise ValidationError("labels must lie in [0, num_clusters)")
        if np.unique(labels).size != self.num_clusters:
            raise ValidationError("every cluster must be non-empty")
        if centroids.shape[0] != self.num_clusters:
            raise ValidationError("one centroid per cluster required")
        if priors.shape != (self.num_clusters,) or abs(priors.sum() - 1.0) > 1e-6:
            raise ValidationError("priors must be one value per cluster summing to 1")
        for arr in (labels, centroids, priors):
            arr.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "priors", priors)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_clusters)


def cosine_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine distances 1 - (x.y)/(|x||y|) with near-zero snap.

    Raises ValidationError on zero-norm rows. Distances within 1e-12 of 0
    are snapped to exactly 0 so identical vectors compare equal.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    norms_a = np.linalg.norm(a, axis=1)
    norms_b = np.linalg.norm(b, axis=1)
    if np.any(norms_a < 1e-12) or np.any(norms_b < 1e-12):
        raise ValidationError("cosine distance undefined for zero-norm vectors")
    dist = 1.0 - (a @ b.T) / np.outer(norms_a, norms_b)
    dist[np.abs(dist) < _ZERO_DISTANCE_EPS] = 0.0
    return dist


class _MergeState:
    """Active clusters during agglomeration, indexed by current list position.

    Ties at equal distance resolve to the lexicographically smallest
    (i, j) position pair; the merged cluster takes position i and position
    j is removed, so positions stay aligned with the distance matrix.
    """

    def __init__(self, vectors: np.ndarray) -> None:
        self.vectors = vectors
        n = vectors.shape[0]
        self.members: list[list[int]] = [[i] for i in range(n)]
        self.sums: list[np.ndarray] = [vectors[i].copy() for i in range(n)]
        centroids = vectors.copy()
        dist = cosine_distances(centroids, centroids)
        # only i < j is a valid candidate pair
        dist[np.tril_indices(n)] = np.inf
        self.dist = dist

    def __len__(self) -> int:
        return len(self.members)

    def centroid(self, i: int) -> np.ndarray:
        return self.sums[i] / len(self.members[i])

    def closest_pair(self) -> tuple[int, int, float]:
        flat = int(np.argmin(self.dist))
        i, j = divmod(flat, len(self.members))
        return i, j, float(self.dist[i, j])

    def merge(self, i: int, j: int) -> None:
        self.members[i].extend(self.members[j])
        self.sums[i] = self.sums[i] + self.sums[j]
        del self.members[j]
        del self.sums[j]
        self.dist = np.delete(np.delete(self.dist, j, axis=0), j, axis=1)
        if len(self.members) == 1:
            return
        centroid_i = self.centroid(i)[np.newaxis, :]
        others = np.vstack([self.centroid(k) for k in range(len(self.members))])
        row = cosine_distances(centroid_i, others)[0]
        self.dist[i, i + 1 :] = row[i + 1 :]
        self.dist[:i, i] = row[:i]

    def result(self) -> ClusteringResult:
        n = self.vectors.shape[0]
        labels = np.empty(n, dtype=np.int64)
        for g, cluster in enumerate(self.members):
            labels[cluster] = g
        num = len(self.members)
        centroids = np.vstack([self.centroid(g) for g in range(num)])
        priors = np.full(num, 1.0 / num)
        return ClusteringResult(labels=labels, centroids=centroids, priors=priors, num_clusters=num)


def _validated_vectors(vectors: np.ndarray) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValidationError(f"vectors must be a non-empty (N, D) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("vectors contain non-finite values")
    return arr


def ahc_upgmc(vectors: np.ndarray, config: AhcConfig) -> ClusteringResult:
    """Centroid-linkage AHC with threshold stopping.

    Repeatedly merges the pair of clusters whose centroids are closest in
    cosine distance until that minimum distance exceeds
    ``config.distance_threshold``. Vectors are expected length-normalized
    by the caller; centroids are means of the member vectors as-is.
    """
    if config.stopping != "threshold":
        raise ValidationError("ahc_upgmc implements threshold stopping; use ahc_asc for stopping='asc'")
    state = _MergeState(_validated_vectors(vectors))
    while len(state) > 1:
        i, j, dist = state.closest_pair()
        if dist > config.distance_threshold:
            break
        state.merge(i, j)
    return state.result()


def ahc_asc(vectors: np.ndarray, config: AhcConfig) -> ClusteringResult:
    """Centroid-linkage AHC with the alternative stopping criterion.

    Merging proceeds in minimum-distance order with no distance threshold
    and stops immediately before the first merge in which both operands
    are larger than ``config.min_cluster_size``; the minimum-cluster-size
    pass then runs on the outcome.
    """
    arr = _validated_vectors(vectors)
    state = _MergeState(arr)
    mcs = config.min_cluster_size
    while len(state) > 1:
        i, j, _ = state.closest_pair()
        if len(state.members[i]) > mcs and len(state.members[j]) > mcs:
            break
        state.merge(i, j)
    return apply_mcs(state.result(), arr, mcs)


def apply_mcs(result: ClusteringResult, vectors: np.ndarray, min_cluster_size: int) -> ClusteringResult:
    """Dissolve clusters smaller than ``min_cluster_size`` into large ones.

    Every small cluster joins the large cluster whose centroid is nearest
    (cosine) to its own centroid, distances taken against the original
    large centroids; receiving centroids are recomputed once afterwards.
    If no cluster is large, the biggest one (ties to the lowest label) is
    promoted.
    """
    if min_cluster_size < 1:
        raise ValidationError(f"min_cluster_size must be >= 1, got {min_cluster_size}")
    arr = _validated_vectors(vectors)
    if arr.shape[0] != result.labels.shape[0]:
        raise ValidationError("vectors and labels disagree in length")

    sizes = result.cluster_sizes()
    large = np.flatnonzero(sizes >= min_cluster_size)
    if large.size == 0:
        large = np.array([int(np.argmax(sizes))])
    small = np.setdiff1d(np.arange(result.num_clusters), large)
    if small.size == 0:
        return result

    nearest = cosine_distances(result.centroids[small], result.centroids[large]).argmin(axis=1)
    relabel = {int(g): new for new, g in enumerate(large)}
    for s, target in zip(small, nearest):
        relabel[int(s)] = int(target)

    labels = np.array([relabel[int(g)] for g in result.labels], dtype=np.int64)
    num = large.size
    centroids = np.vstack([arr[labels == g].mean(axis=0) for g in range(num)])
    priors = np.full(num, 1.0 / num)
    return ClusteringResult(labels=labels, centroids=centroids, priors=priors, num_clusters=num)
