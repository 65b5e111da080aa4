"""Agglomerative clustering of feature columns with Ward linkage.

Features are points in n_samples-dimensional space; each merge joins the
pair of clusters whose union increases the total within-cluster sum of
squared distances to centroids the least. Merge heights record that SSE
increase directly (not its square root): for z-scored columns it grows
linearly with the number of samples, which is what makes a cut threshold
proportional to the sample count dimensionally sensible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ClusteringError

DEFAULT_CUT_FACTOR = 0.05


@dataclass(frozen=True)
class Merge:
    """One agglomeration step; left/right are node ids, height is the SSE increase."""

    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Ward merge tree: leaves 0..n-1 are features, merge k creates node n+k."""

    leaves: tuple[str, ...]
    merges: tuple[Merge, ...]

    def __post_init__(self):
        if len(self.merges) != len(self.leaves) - 1:
            raise ClusteringError("a dendrogram over n leaves needs n-1 merges")

    def to_dict(self) -> dict:
        return {
            "leaves": list(self.leaves),
            "merges": [[m.left, m.right, m.height, m.size] for m in self.merges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class ClusterAssignment:
    cluster_of: np.ndarray
    n_clusters: int

    def members(self, cluster: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.cluster_of == cluster)]


def default_cut_threshold(n_samples: int, factor: float = DEFAULT_CUT_FACTOR) -> float:
    """Cut height used throughout: factor (default 0.05) times the sample count."""
    return factor * n_samples


def ward_cluster(
    z_matrix,
    names: Sequence[str] | None = None,
    *,
    check_normalized: bool = True,
) -> Dendrogram:
    """Cluster the columns of a z-scored sample matrix bottom-up.

    Pairwise SSE increases start at half the squared Euclidean distance
    between columns and are maintained through the Lance-Williams recurrence
    for Ward's method, so every recorded height equals the exact
    delta-SSE of its merge. Equal heights break toward the pair whose
    (smaller name, larger name) label pair sorts first, which makes the
    tree independent of column order.

    ``check_normalized`` rejects columns whose mean is not ~0; disable it
    to cluster raw coordinates (used by low-level tests).
    """
    z = np.asarray(z_matrix, dtype=float)
    if z.ndim != 2:
        raise ClusteringError("expected a 2-D n_samples x n_features matrix")
    n_samples, n_features = z.shape
    if n_features < 2:
        raise ClusteringError("need at least 2 features to cluster")
    if names is None:
        names = tuple(f"f{i:05d}" for i in range(n_features))
    else:
        names = tuple(names)
        if len(names) != n_features:
            raise ClusteringError("one name per feature column required")
        if len(set(names)) != n_features:
            raise ClusteringError("feature names must be unique")
    if check_normalized:
        means = z.mean(axis=0)
        bad = np.flatnonzero(np.abs(means) > 1e-6)
        if bad.size:
            raise ClusteringError(
                f"column {names[bad[0]]!r} is not z-scored (mean {means[bad[0]]:.3g})"
            )

    points = z.T  # (n_features, n_samples)
    dist = np.full((n_features, n_features), np.inf)
    for i in range(n_features):
        diff = points[i] - points
        dist[i] = 0.5 * np.einsum("ij,ij->i", diff, diff)
    np.fill_diagonal(dist, np.inf)

    active = np.ones(n_features, dtype=bool)
    size = np.ones(n_features, dtype=np.int64)
    label = list(names)  # lexicographically smallest member name per slot
    node_id = list(range(n_features))

    merges: list[Merge] = []
    for step in range(n_features - 1):
        height = float(dist.min())
        ii, jj = np.nonzero(dist == height)
        best = None
        for i, j in zip(ii.tolist(), jj.tolist()):
            if i >= j:
                continue
            key = (min(label[i], label[j]), max(label[i], label[j]))
            if best is None or key < best[0]:
                best = (key, i, j)
        assert best is not None
        _, i, j = best
        left_slot, right_slot = (i, j) if label[i] <= label[j] else (j, i)
        merged_size = int(size[i] + size[j])
        merges.append(Merge(node_id[left_slot], node_id[right_slot], height, merged_size))

        others = active.copy()
        others[i] = others[j] = False
        k = np.flatnonzero(others)
        if k.size:
            s_i, s_j, s_k = size[i], size[j], size[k]
            updated = (
                (s_i + s_k) * dist[i, k] + (s_j + s_k) * dist[j, k] - s_k * height
            ) / (s_i + s_j + s_k)
            updated = np.maximum(updated, 0.0)
            dist[i, k] = updated
            dist[k, i] = updated
        size[i] = merged_size
        label[i] = min(label[i], label[j])
        node_id[i] = n_features + step
        active[j] = False
        dist[j, :] = np.inf
        dist[:, j] = np.inf

    return Dendrogram(leaves=names, merges=tuple(merges))


def cut_dendrogram(dendrogram: Dendrogram, threshold: float) -> ClusterAssignment:
    """Flatten the tree: apply every merge with height strictly below threshold.

    Clusters are the connected components that remain; indices are dense
    and ordered by each cluster's first feature.
    """
    if threshold < 0:
        raise ClusteringError("threshold must be >= 0")
    n = len(dendrogram.leaves)
    parent = list(range(n + len(dendrogram.merges)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, merge in enumerate(dendrogram.merges):
        if merge.height < threshold:
            node = n + k
            parent[find(merge.left)] = find(node)
            parent[find(merge.right)] = find(node)

    roots: dict[int, int] = {}
    cluster_of = np.empty(n, dtype=np.int64)
    for leaf in range(n):
        root = find(leaf)
        if root not in roots:
            roots[root] = len(roots)
        cluster_of[leaf] = roots[root]
    return ClusterAssignment(cluster_of=cluster_of, n_clusters=len(roots))
