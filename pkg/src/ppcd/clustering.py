"""Lloyd k-means and the warm-start merge for unified ARBT pairs.

Data matrices follow the rest of the package: ``a x n``, one record per
column.  Cluster labels are ``0..k-1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INIT_STRATEGIES = ("random", "sequential")


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 7
    init: str = "random"
    max_iterations: int = 100
    epsilon: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ClusteringError(f"k must be positive, got {self.k}")
        if self.init not in INIT_STRATEGIES:
            raise ClusteringError(f"unknown init {self.init!r}; choose from {INIT_STRATEGIES}")
        if self.max_iterations < 1:
            raise ClusteringError("max_iterations must be at least 1")
        if not 0.0 <= self.epsilon < 1.0:
            raise ClusteringError(f"epsilon must lie in [0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray  # a x k
    iterations_used: int
    wcss: float
    wcss_history: tuple = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[1]

    @property
    def n(self) -> int:
        return len(self.assignments)


def euclidean_dist(r1, r2) -> float:
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != r2.shape:
        raise ClusteringError(f"records of different dimension: {r1.shape} vs {r2.shape}")
    diff = r1 - r2
    return float(np.sqrt(np.dot(diff, diff)))


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """``n x k`` squared distances from records (rows of x) to centroids.

    Differences are formed explicitly rather than via the ``|x|^2 - 2x.c``
    expansion, so that rotated copies of the data see the same ordering of
    distances up to last-bit rounding.
    """
    n, k = x.shape[0], centroids.shape[0]
    out = np.empty((n, k))
    for c in range(k):
        d = x - centroids[c]
        out[:, c] = np.einsum("ij,ij->i", d, d)
    return out


def _assign(x, centroids):
    return np.argmin(_sq_dists(x, centroids), axis=1)  # argmin breaks ties toward the lowest index


def _update(x, labels, previous):
    k = previous.shape[0]
    counts = np.bincount(labels, minlength=k)
    sums = np.column_stack([np.bincount(labels, weights=x[:, d], minlength=k) for d in range(x.shape[1])])
    out = previous.copy()
    nonempty = counts > 0
    out[nonempty] = sums[nonempty] / counts[nonempty, None]
    return out


def _wcss(x, labels, centroids) -> float:
    d = x - centroids[labels]
    return float(np.einsum("ij,ij->", d, d))


def initial_centroids(values: np.ndarray, cfg: KMeansConfig) -> np.ndarray:
    """Records used as starting centroids, ``a x k``."""
    n = values.shape[1]
    if cfg.init == "sequential":
        idx = np.arange(cfg.k)
    else:
        idx = np.random.default_rng(cfg.rng_seed).choice(n, size=cfg.k, replace=False)
    return values[:, idx].copy()


def lloyd(values: np.ndarray, centroids: np.ndarray, max_iterations: int = 100, epsilon: float = 0.0,
          labels=None) -> Clustering:
    """Run Lloyd iterations from given centroids (and optional current labels).

    One iteration is an assignment pass followed by a centroid update.  The
    loop stops once the fraction of records that changed cluster in an
    iteration is at most ``epsilon``; without prior labels every record counts
    as moved in the first iteration.
    """
    x = np.ascontiguousarray(values.T)
    n = x.shape[0]
    cen = np.array(centroids, dtype=float).T.copy()
    history = []
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        new = _assign(x, cen)
        moved = n if labels is None else int(np.count_nonzero(new != labels))
        labels = new
        cen = _update(x, labels, cen)
        history.append(_wcss(x, labels, cen))
        if moved <= epsilon * n:
            break
    return Clustering(labels, cen.T.copy(), iterations, history[-1], tuple(history))


def kmeans(values, cfg: KMeansConfig, init_centroids=None) -> Clustering:
    """Cluster the columns of ``values`` (or a :class:`Dataset`)."""
    values = np.asarray(getattr(values, "values", values), dtype=float)
    n = values.shape[1]
    if n < 1:
        raise ClusteringError("cannot cluster an empty dataset")
    if cfg.k > n:
        raise ClusteringError(f"k = {cfg.k} exceeds the number of records n = {n}")
    if init_centroids is None:
        init_centroids = initial_centroids(values, cfg)
    init_centroids = np.asarray(init_centroids, dtype=float)
    if init_centroids.shape != (values.shape[0], cfg.k):
        raise ClusteringError(f"initial centroids must have shape {(values.shape[0], cfg.k)}")
    return lloyd(values, init_centroids, cfg.max_iterations, cfg.epsilon)


def warm_start_merge(ci: Clustering, cj: Clustering, unified, max_iterations: int = 100,
                     epsilon: float = 0.0) -> Clustering:
    """Merge two clustered subsets and refine with Lloyd.

    ``unified`` holds ``[Y_i*, Y_j]`` (a :class:`UnifiedPair` or a matrix whose
    first ``ci.n`` columns are the rotated subset ``i``).  Cluster centroids of
    ``Y_i*`` are recomputed from ``ci``'s labels, since ``ci`` may have been
    learned before the unifying rotation.  Each such cluster is moved whole
    into the ``Y_j`` cluster with the nearest centroid, then Lloyd runs from
    the merged labels.
    """
    if ci.k != cj.k:
        raise ClusteringError(f"cannot merge clusterings with k = {ci.k} and k = {cj.k}")
    merged = np.asarray(getattr(unified, "merged", unified), dtype=float)
    if merged.shape[1] != ci.n + cj.n:
        raise ClusteringError(
            f"unified data has {merged.shape[1]} records, clusterings cover {ci.n} + {cj.n}"
        )
    x = np.ascontiguousarray(merged.T)
    xi, xj = x[: ci.n], x[ci.n:]

    cen_i = _update(xi, np.asarray(ci.assignments), np.zeros((ci.k, x.shape[1])))
    cen_j = _update(xj, np.asarray(cj.assignments), cj.centroids.T.astype(float))
    target = _assign(cen_i, cen_j)
    labels = np.concatenate([target[ci.assignments], cj.assignments])
    start = _update(x, labels, cen_j)
    return lloyd(merged, start.T, max_iterations, epsilon, labels=labels)


def is_fixed_point(values, c: Clustering, atol: float = 1e-9) -> bool:
    """Every record is nearest its own centroid and centroids are cluster means."""
    x = np.ascontiguousarray(np.asarray(getattr(values, "values", values), dtype=float).T)
    cen = c.centroids.T
    d = _sq_dists(x, cen)
    own = d[np.arange(len(x)), c.assignments]
    if np.any(own > d.min(axis=1) + atol):
        return False
    means = _update(x, np.asarray(c.assignments), cen)
    return bool(np.allclose(means, cen, rtol=0, atol=atol))


def label_agreement(c1, c2, max_k: int = 8) -> float:
    """Best fraction of matching labels over all relabelings of ``c2``."""
    a1 = np.asarray(getattr(c1, "assignments", c1))
    a2 = np.asarray(getattr(c2, "assignments", c2))
    if a1.shape != a2.shape:
        raise ClusteringError("clusterings cover different numbers of records")
    k = max(getattr(c1, "k", 0), getattr(c2, "k", 0), int(a1.max()) + 1, int(a2.max()) + 1)
    if k > max_k:
        raise ClusteringError(
            f"exhaustive permutation search over k = {k} labels ({math.factorial(k)} cases) is too large; "
            f"use k <= {max_k}"
        )
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (a1, a2), 1)
    best = max(sum(table[perm[b], b] for b in range(k)) for perm in itertools.permutations(range(k)))
    return float(best / len(a1))


def save_clustering(c: Clustering, path, centroids_path=None) -> None:
    path = Path(path)
    rows = np.column_stack([np.arange(c.n), c.assignments])
    np.savetxt(path, rows, delimiter=",", fmt="%d", header="record,cluster", comments="")
    if centroids_path is not None:
        np.savetxt(centroids_path, c.centroids.T, delimiter=",", fmt="%.17g")


def load_assignments(path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if not np.array_equal(rows[:, 0], np.arange(len(rows))):
        raise ClusteringError(f"{path}: record indices must run 0..n-1 in order")
    return rows[:, 1]


def clustering_from_labels(values, labels, k=None) -> Clustering:
    """Rebuild a :class:`Clustering` (centroids, wcss) from stored labels."""
    values = np.asarray(getattr(values, "values", values), dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if k is None else k
    x = np.ascontiguousarray(values.T)
    cen = _update(x, labels, np.zeros((k, x.shape[1])))
    return Clustering(labels, cen.T.copy(), 0, _wcss(x, labels, cen))
