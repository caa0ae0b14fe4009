"""Plain k-means: seeding, Lloyd iterations and best-of-R restarts."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

_CHUNK = 4096


def _points(ds):
    return ds.points if hasattr(ds, "points") else np.asarray(ds, dtype=float)


def sq_distances(X, C):
    """Exact squared Euclidean distances, shape (n, K).

    Computed as a difference rather than the ||x||^2 - 2x.c + ||c||^2
    expansion so that equal distances compare equal and ties resolve by index.
    """
    X = np.asarray(X, dtype=float)
    C = np.asarray(C, dtype=float)
    out = np.empty((X.shape[0], C.shape[0]))
    for s in range(0, X.shape[0], _CHUNK):
        diff = X[s:s + _CHUNK, None, :] - C[None, :, :]
        out[s:s + _CHUNK] = np.einsum("nkm,nkm->nk", diff, diff)
    return out


def cluster_means(X, assignment, K, fallback=None):
    """Mean of each cluster; empty clusters keep ``fallback[k]`` (or zeros)."""
    X = np.asarray(X, dtype=float)
    counts = np.bincount(assignment, minlength=K).astype(float)
    sums = np.zeros((K, X.shape[1]))
    np.add.at(sums, assignment, X)
    centers = np.zeros_like(sums) if fallback is None else np.array(fallback, dtype=float)
    nz = counts > 0
    centers[nz] = sums[nz] / counts[nz, None]
    return centers


def kmeans_cost(X, assignment, centers):
    X = np.asarray(X, dtype=float)
    diff = X - centers[assignment]
    return float(np.einsum("ij,ij->", diff, diff))


@dataclass
class Clustering:
    assignment: np.ndarray
    centers: np.ndarray
    cost: float
    iterations: int = 0

    @property
    def K(self):
        return self.centers.shape[0]

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.K)

    @classmethod
    def from_assignment(cls, ds, assignment, K, centers=None):
        X = _points(ds)
        assignment = np.asarray(assignment, dtype=np.int64)
        if centers is None:
            centers = cluster_means(X, assignment, K)
        return cls(assignment, np.asarray(centers, dtype=float), kmeans_cost(X, assignment, centers))


def _check_k(n, K):
    if K < 1 or K > n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={n}")


def random_init(ds, K, seed):
    X = _points(ds)
    _check_k(len(X), K)
    rng = np.random.default_rng(seed)
    return X[rng.choice(len(X), size=K, replace=False)].copy()


def kmeanspp_init(ds, K, seed):
    """k-means++ seeding: each new center is a data point drawn with
    probability proportional to its squared distance to the chosen centers.

    Once every remaining point coincides with a chosen center (duplicates),
    the draw falls back to uniform over the unchosen indices so that K
    distinct indices are always returned.
    """
    X = _points(ds)
    n = len(X)
    _check_k(n, K)
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(n))]
    d2 = sq_distances(X, X[chosen])[:, 0]
    for _ in range(1, K):
        w = d2.copy()
        w[chosen] = 0.0
        total = w.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=w / total))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        d2 = np.minimum(d2, sq_distances(X, X[nxt:nxt + 1])[:, 0])
    return X[chosen].copy()


def _repair_empty(X, assignment, centers, d2):
    """Give each empty cluster the point farthest from its own center.

    Donors are restricted to clusters with more than one member so the repair
    never empties another cluster.
    """
    K = centers.shape[0]
    counts = np.bincount(assignment, minlength=K)
    own = d2[np.arange(len(X)), assignment].copy()
    for k in np.flatnonzero(counts == 0):
        movable = counts[assignment] > 1
        if not movable.any():
            break
        cand = np.where(movable, own, -np.inf)
        i = int(np.argmax(cand))
        counts[assignment[i]] -= 1
        assignment[i] = k
        counts[k] += 1
        own[i] = 0.0
        centers[k] = X[i]
    return assignment


def lloyd(ds, init, max_iter=300, trace=None):
    """Lloyd iterations from ``init`` until the assignment stops changing.

    ``trace``, if given, is a list that receives the cost after every
    center update.
    """
    X = _points(ds)
    centers = np.array(init, dtype=float)
    K = centers.shape[0]
    if not np.all(np.isfinite(centers)):
        raise ValueError("initial centers must be finite")
    assignment = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = sq_distances(X, centers)
        new = np.argmin(d2, axis=1)
        if len(X) >= K:
            new = _repair_empty(X, new, centers, d2)
        if assignment is not None and np.array_equal(new, assignment):
            break
        assignment = new
        centers = cluster_means(X, assignment, K, fallback=centers)
        if trace is not None:
            trace.append(kmeans_cost(X, assignment, centers))
    return Clustering(assignment, centers, kmeans_cost(X, assignment, centers), it)


def best_of_runs(ds, K, restarts, seed, max_iter=300):
    """All ``restarts`` k-means++ + Lloyd runs; run r always uses the r-th
    child of ``SeedSequence(seed)`` so prefixes of the stream are shared."""
    children = np.random.SeedSequence(seed).spawn(restarts)
    runs = []
    for r, child in enumerate(children):
        run_seed = int(child.generate_state(1)[0])
        res = lloyd(ds, kmeanspp_init(ds, K, run_seed), max_iter=max_iter)
        log.debug("k-means restart %d: cost %.6f", r, res.cost)
        runs.append(res)
    return runs


def best_of(ds, K, restarts=10, seed=0, max_iter=300):
    runs = best_of_runs(ds, K, restarts, seed, max_iter)
    # first minimum wins on ties
    return min(runs, key=lambda c: c.cost)
