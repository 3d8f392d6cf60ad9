"""Patch-pair clustering for group-sparse coding.

Each patch pair is described by its stacked feature [x; y].  A uniformly
sampled subset is clustered agglomeratively (average linkage, Euclidean
distance) and every patch is then assigned to the nearest subset-cluster
centroid, which keeps the cost tractable for stride-1 extraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .exceptions import TooFewPatches

_ASSIGN_CHUNK = 8192


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of patch pairs: labels in [0, M) plus the M centroids used."""

    labels: np.ndarray  # (P,) int64
    centroids: np.ndarray  # (M, 2n)

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        centroids = np.array(self.centroids, dtype=np.float64, order="C")
        labels.setflags(write=False)
        centroids.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centroids", centroids)

    @property
    def cluster_count(self) -> int:
        return self.centroids.shape[0]


def _nearest(features: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per feature row; ties pick the lowest id."""
    labels = np.empty(features.shape[0], dtype=np.int64)
    cent_sq = np.einsum("ij,ij->i", centroids, centroids)
    for start in range(0, features.shape[0], _ASSIGN_CHUNK):
        chunk = features[start : start + _ASSIGN_CHUNK]
        # ||f - c||^2 up to the constant ||f||^2, enough for argmin
        dist = cent_sq[None, :] - 2.0 * (chunk @ centroids.T)
        labels[start : start + _ASSIGN_CHUNK] = np.argmin(dist, axis=1)
    return labels


def _split_largest(
    features: np.ndarray,
    labels: np.ndarray,
    centroids: np.ndarray,
    new_id: int,
) -> np.ndarray:
    """Split the largest cluster at its member farthest from the centroid.

    The farthest member seeds centroid new_id (appended or replacing an
    empty slot); only the split cluster's members are reassigned between
    the two centroids, ties staying with the lower id.
    """
    counts = np.bincount(labels, minlength=centroids.shape[0])
    big = int(np.argmax(counts))
    members = np.where(labels == big)[0]
    gaps = np.einsum(
        "ij,ij->i", features[members] - centroids[big], features[members] - centroids[big]
    )
    far = members[int(np.argmax(gaps))]
    seed = features[far]
    if new_id == centroids.shape[0]:
        centroids = np.vstack([centroids, seed])
    else:
        centroids = centroids.copy()
        centroids[new_id] = seed
    to_new = np.einsum(
        "ij,ij->i", features[members] - seed, features[members] - seed
    )
    if new_id < big:
        move = to_new <= gaps
    else:
        move = to_new < gaps
    labels[members[move]] = new_id
    labels[far] = new_id
    return centroids


def cluster_patches(
    xs: np.ndarray,
    ys: np.ndarray,
    clusters: int,
    sample_cap: int = 2000,
    seed: int = 0,
) -> ClusterAssignment:
    """Partition patch pairs into `clusters` groups by feature similarity.

    The subset actually fed to the linkage is min(P, sample_cap) rows
    sampled uniformly without replacement; every patch is then assigned
    to its nearest subset centroid.  Empty clusters (and missing ones,
    when merge ties collapse the dendrogram early) are repaired by
    splitting the largest cluster at its farthest member.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 2:
        raise ValueError("patch matrices must share one (n, P) shape")
    features = np.vstack([xs, ys]).T.copy()
    count = features.shape[0]
    if clusters < 1:
        raise ValueError("clusters must be >= 1")
    if count < clusters:
        raise TooFewPatches(f"{count} patches cannot fill {clusters} clusters")
    if clusters == 1:
        return ClusterAssignment(
            labels=np.zeros(count, dtype=np.int64),
            centroids=features.mean(axis=0, keepdims=True),
        )

    rng = np.random.default_rng(seed)
    take = min(count, max(sample_cap, clusters))
    if take < count:
        picked = np.sort(rng.choice(count, size=take, replace=False))
    else:
        picked = np.arange(count)
    subset = features[picked]
    merges = linkage(subset, method="average", metric="euclidean")
    subset_labels = fcluster(merges, t=clusters, criterion="maxclust")

    # centroid ids follow first occurrence so numbering is input-order stable
    order: dict[int, int] = {}
    for lab in subset_labels:
        if lab not in order:
            order[lab] = len(order)
    centroids = np.stack(
        [subset[subset_labels == lab].mean(axis=0) for lab in order]
    )

    labels = _nearest(features, centroids)
    while centroids.shape[0] < clusters:
        centroids = _split_largest(features, labels, centroids, centroids.shape[0])
    while True:
        counts = np.bincount(labels, minlength=clusters)
        empty = np.where(counts == 0)[0]
        if empty.size == 0:
            break
        centroids = _split_largest(features, labels, centroids, int(empty[0]))
    return ClusterAssignment(labels=labels, centroids=centroids)
