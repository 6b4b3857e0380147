"""Pseudo-class discovery from semantic embeddings.

First-neighbor-graph clustering builds a nested partition hierarchy without a
preset cluster count: two points are linked when either is the other's
nearest neighbor or they share one, and connected components form clusters.
The recursion repeats over cluster means until everything merges. The level
kept is the one with the best silhouette score; its cluster means become the
routing keys.

All distances are Euclidean. Nearest-neighbor and assignment ties break
toward the smallest index so results do not depend on evaluation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray  # record index -> cluster id, ids contiguous from 0
    n_clusters: int


@dataclass
class FinchHierarchy:
    """Nested partitions, finest first; each level merges whole clusters of the previous."""

    levels: list[Partition]
    order: str = "fine_to_coarse"
    distance_evals: int = 0  # pairwise L2 evaluations spent building the hierarchy


@dataclass
class ClusterModel:
    """Chosen partition plus per-cluster mean keys used to route queries."""

    chosen_level: Optional[int]
    n_clusters: int
    keys: np.ndarray  # (K, dim) float32
    sizes: np.ndarray  # (K,) member counts
    assignments: np.ndarray  # training record index -> cluster id
    silhouette_by_level: list[Optional[float]] = field(default_factory=list)
    cluster_names: Optional[list[str]] = None  # set in labeled mode

    def to_json(self) -> dict:
        return {
            "chosen_level": self.chosen_level,
            "n_clusters": self.n_clusters,
            "keys": [[float(v) for v in row] for row in self.keys],
            "sizes": [int(s) for s in self.sizes],
            "assignments": [int(a) for a in self.assignments],
            "silhouette_by_level": [
                None if s is None else float(s) for s in self.silhouette_by_level
            ],
            "cluster_names": self.cluster_names,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ClusterModel":
        return cls(
            chosen_level=d["chosen_level"],
            n_clusters=int(d["n_clusters"]),
            keys=np.asarray(d["keys"], dtype=np.float32),
            sizes=np.asarray(d["sizes"], dtype=np.int64),
            assignments=np.asarray(d["assignments"], dtype=np.int64),
            silhouette_by_level=[
                None if s is None else float(s) for s in d["silhouette_by_level"]
            ],
            cluster_names=d.get("cluster_names"),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "ClusterModel":
        with open(path) as f:
            return cls.from_json(json.load(f))


def _check_finite(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("points contain NaN or Inf")
    return pts


def first_neighbors(points: np.ndarray) -> np.ndarray:
    """Index of each point's nearest other point; ties go to the smallest index."""
    pts = _check_finite(points)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("first neighbors need at least 2 points")
    d = cdist(pts, pts)
    np.fill_diagonal(d, np.inf)
    return d.argmin(axis=1)


def _adjacency(points: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
    """Three-clause linkage plus the pairwise distances it was derived from."""
    pts = _check_finite(points)
    n = pts.shape[0]
    if n == 1:
        return sp.csr_matrix((1, 1), dtype=bool), np.zeros((1, 1))
    d = cdist(pts, pts)
    dd = d.copy()
    np.fill_diagonal(dd, np.inf)
    nbr = dd.argmin(axis=1)
    rows = np.arange(n)
    link = sp.csr_matrix((np.ones(n, dtype=bool), (rows, nbr)), shape=(n, n))
    shared = (link @ link.T).astype(bool)  # same first neighbor
    adj = (link + link.T + shared).astype(bool).tolil()
    adj.setdiag(False)
    return adj.tocsr(), d


def first_neighbor_graph(points: np.ndarray) -> sp.csr_matrix:
    """Symmetric boolean adjacency: linked iff one is the other's first
    neighbor or both share the same first neighbor. A single point yields the
    1x1 empty graph (one isolated vertex)."""
    adj, _ = _adjacency(points)
    return adj


def finch(points: np.ndarray) -> FinchHierarchy:
    """Build the full partition hierarchy.

    Level 0 clusters the points themselves; level t+1 clusters the unweighted
    means of level-t clusters. Following the published procedure, mean-level
    links longer than the largest linked distance of level 0 are severed —
    without this, clusters that finish collapsing early would swallow their
    still-splitting neighbors and the natural grouping could vanish from the
    hierarchy. Recursion stops at a single cluster or when a step stops
    merging anything.
    """
    pts = _check_finite(points)
    n = pts.shape[0]
    if n == 1:
        return FinchHierarchy(
            levels=[Partition(labels=np.zeros(1, dtype=np.int64), n_clusters=1)],
            distance_evals=0,
        )
    adj, dists = _adjacency(pts)
    evals = n * n
    linked = adj.tocoo()
    max_linked = float(dists[linked.row, linked.col].max()) if linked.nnz else 0.0
    n_comp, labels = connected_components(adj, directed=False)
    labels, k = labels.astype(np.int64), int(n_comp)
    levels = [Partition(labels=labels, n_clusters=k)]
    while k > 1:
        means, _ = cluster_means(pts, labels, k)
        adj, dists = _adjacency(means)
        evals += k * k
        coo = adj.tocoo()
        keep = dists[coo.row, coo.col] <= max_linked
        filtered = sp.csr_matrix(
            (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=adj.shape
        )
        n_comp, mean_labels = connected_components(filtered, directed=False)
        k_new = int(n_comp)
        if k_new == k:  # nothing merged; hierarchy is done
            break
        labels = mean_labels[labels].astype(np.int64)
        levels.append(Partition(labels=labels, n_clusters=k_new))
        k = k_new
    return FinchHierarchy(levels=levels, distance_evals=evals)


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over points: (b - a) / max(a, b) with Euclidean distance.

    ``a`` is the mean distance to the point's own cluster (excluding itself,
    0 for singletons); ``b`` the smallest mean distance to any other cluster.
    Coincident degenerate pairs (a = b = 0) contribute 0.
    """
    pts = _check_finite(points)
    labels = np.asarray(labels)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("silhouette needs at least 2 points")
    uniq, idx = np.unique(labels, return_inverse=True)
    k = uniq.shape[0]
    if k < 2:
        raise ValueError("silhouette is undefined for a single cluster")
    d = cdist(pts, pts)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), idx] = 1.0
    sums = d @ onehot  # (n, k) summed distance to each cluster
    counts = onehot.sum(axis=0)
    own = idx
    own_counts = counts[own]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(own_counts > 1, sums[np.arange(n), own] / (own_counts - 1), 0.0)
    mean_to = sums / counts[None, :]
    mean_to[np.arange(n), own] = np.inf
    b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def select_level(hierarchy: FinchHierarchy, points: np.ndarray) -> ClusterModel:
    """Pick the silhouette-argmax level and compute its mean keys.

    Ties prefer fewer clusters. If no level has 2+ clusters, falls back to a
    single cluster keyed by the global mean.
    """
    pts = _check_finite(points)
    if not hierarchy.levels:
        raise ValueError("empty hierarchy")
    scores: list[Optional[float]] = []
    for part in hierarchy.levels:
        if part.n_clusters >= 2 and pts.shape[0] >= 2:
            scores.append(silhouette(pts, part.labels))
        else:
            scores.append(None)
    scored = [(s, i) for i, s in enumerate(scores) if s is not None]
    if not scored:
        labels = np.zeros(pts.shape[0], dtype=np.int64)
        return ClusterModel(
            chosen_level=0,
            n_clusters=1,
            keys=pts.mean(axis=0, keepdims=True).astype(np.float32),
            sizes=np.array([pts.shape[0]]),
            assignments=labels,
            silhouette_by_level=scores,
        )
    best = max(s for s, _ in scored)
    candidates = [i for s, i in scored if s == best]
    chosen = min(candidates, key=lambda i: (hierarchy.levels[i].n_clusters, i))
    part = hierarchy.levels[chosen]
    keys, sizes = cluster_means(pts, part.labels, part.n_clusters)
    return ClusterModel(
        chosen_level=chosen,
        n_clusters=part.n_clusters,
        keys=keys.astype(np.float32),
        sizes=sizes,
        assignments=part.labels.copy(),
        silhouette_by_level=scores,
    )


def cluster_means(
    points: np.ndarray, labels: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic mean of each cluster's members plus member counts."""
    pts = np.asarray(points, dtype=np.float64)
    means = np.zeros((k, pts.shape[1]))
    np.add.at(means, labels, pts)
    sizes = np.bincount(labels, minlength=k)
    return means / sizes[:, None], sizes


def assign(e: np.ndarray, model: ClusterModel) -> int:
    """Index of the key nearest to ``e`` (L2); ties go to the smallest index."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (model.keys.shape[1],):
        raise ValueError(f"vector has dim {e.shape}, keys have dim {model.keys.shape[1]}")
    d = np.linalg.norm(model.keys.astype(np.float64) - e[None, :], axis=1)
    return int(d.argmin())


def assign_batch(vectors: np.ndarray, model: ClusterModel) -> np.ndarray:
    """Vectorized ``assign`` over rows."""
    v = np.asarray(vectors, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != model.keys.shape[1]:
        raise ValueError(f"vectors shape {v.shape} incompatible with keys {model.keys.shape}")
    d = cdist(v, model.keys.astype(np.float64))
    return d.argmin(axis=1)
