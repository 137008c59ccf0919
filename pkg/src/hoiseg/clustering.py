"""Motion clustering (k-means under DTW), context clustering and their merge."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import DBSCAN

from .similarity import _as_seq, dtw_barycenter, dtw_distance, pairwise_distances


@dataclass
class MotionClustering:
    k: int
    labels: np.ndarray          # 1-based
    barycenters: list[np.ndarray]
    wcss: float
    history: list[float] = field(default_factory=list)


def _dist_to_centers(seqs, centers, window):
    return np.array([[dtw_distance(s, c, window) for c in centers] for s in seqs])


def _seed_centers(dmat: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    # k-means++ style: next seed drawn with probability ~ squared distance
    n = len(dmat)
    picks = [int(rng.integers(n))]
    while len(picks) < k:
        d2 = dmat[:, picks].min(axis=1) ** 2
        if d2.sum() <= 0:
            rest = [i for i in range(n) if i not in picks]
            picks.append(int(rng.choice(rest)))
        else:
            picks.append(int(rng.choice(n, p=d2 / d2.sum())))
    return picks


def _lloyd(seqs, dmat, k, rng, max_iter, window, dba_iters):
    n = len(seqs)
    centers = [seqs[i].copy() for i in _seed_centers(dmat, k, rng)]
    dist = _dist_to_centers(seqs, centers, window)
    labels = dist.argmin(axis=1)
    wcss = np.inf
    history = []
    for _ in range(max_iter):
        new_centers = []
        for c in range(k):
            idx = np.flatnonzero(labels == c)
            if not len(idx):
                # empty cluster: restart it on the worst-served sequence
                idx = np.array([int(np.argmax(dist[np.arange(n), labels]))])
            # medoid straight from the precomputed matrix
            med = idx[np.argmin(dmat[np.ix_(idx, idx)].sum(axis=1))]
            new_centers.append(dtw_barycenter([seqs[i] for i in idx], iters=dba_iters,
                                              window=window, init=seqs[med]))
        new_dist = _dist_to_centers(seqs, new_centers, window)
        new_labels = new_dist.argmin(axis=1)
        new_wcss = float((new_dist[np.arange(n), new_labels] ** 2).sum())
        if not new_wcss < wcss:
            break
        centers, dist, labels, wcss = new_centers, new_dist, new_labels, new_wcss
        history.append(wcss)
    return labels, centers, wcss, history


def kmeans_dtw(seqs, k: int, restarts: int = 10, seed: int = 0, max_iter: int = 20,
               window: int | None = None, dba_iters: int = 10, dmat=None) -> MotionClustering:
    """Best of ``restarts`` Lloyd runs with DTW assignment and DBA centroids.

    After seeding, each update/assign step is kept only while it lowers
    WCSS, so each run's history is non-increasing.
    """
    seqs = [_as_seq(s) for s in seqs]
    n = len(seqs)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of sequences ({n})")
    if dmat is None:
        dmat = pairwise_distances(seqs, window)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        labels, centers, wcss, hist = _lloyd(seqs, dmat, k, rng, max_iter, window, dba_iters)
        if best is None or wcss < best[2]:
            best = (labels, centers, wcss, hist)
    labels, centers, wcss, hist = best
    # relabel 1..k by first occurrence so equal partitions print equally
    order = {}
    for lab in labels:
        order.setdefault(int(lab), len(order) + 1)
    used = sorted(order, key=order.get)
    unused = [c for c in range(k) if c not in order]
    for c in unused:
        order[c] = len(order) + 1
    out_labels = np.array([order[int(lab)] for lab in labels])
    out_centers = [centers[c] for c in used + unused]
    return MotionClustering(k, out_labels, out_centers, wcss, hist)


def wcss_curve(seqs, k_max: int = 10, restarts: int = 10, seed: int = 0,
               window=None, dba_iters: int = 10) -> dict[int, float]:
    seqs = [_as_seq(s) for s in seqs]
    dmat = pairwise_distances(seqs, window)
    return {k: kmeans_dtw(seqs, k, restarts, seed + k, window=window,
                          dba_iters=dba_iters, dmat=dmat).wcss
            for k in range(1, min(k_max, len(seqs)) + 1)}


def elbow_select(wcss: dict[int, float]) -> int:
    """Interior k with the largest second difference; ties go to the smaller k."""
    ks = sorted(wcss)
    if len(ks) < 3:
        raise ValueError("elbow needs WCSS on at least 3 values of k")
    if ks != list(range(ks[0], ks[-1] + 1)):
        raise ValueError("WCSS must cover a contiguous range of k")
    best_k, best = None, -np.inf
    for k in ks[1:-1]:
        d2 = wcss[k - 1] - 2 * wcss[k] + wcss[k + 1]
        if d2 > best:
            best_k, best = k, d2
    return best_k


@dataclass
class ContextClustering:
    labels: np.ndarray  # 1-based, first-occurrence order


def context_clusters(contexts, eps: float = 0.5) -> ContextClustering:
    x = np.asarray(contexts, dtype=float)
    if x.ndim != 2:
        raise ValueError("contexts must be equal-width vectors")
    raw = DBSCAN(eps=eps, min_samples=1, metric="euclidean").fit(x).labels_
    return ContextClustering(_renumber(raw))


def _renumber(labels) -> np.ndarray:
    seen = {}
    return np.array([seen.setdefault(lab, len(seen) + 1) for lab in labels], dtype=int)


def ensemble_merge(motion, context) -> np.ndarray:
    """Combine the two labelings into one, numbered by first occurrence."""
    m = np.asarray(getattr(motion, "labels", motion))
    c = np.asarray(getattr(context, "labels", context))
    if m.shape != c.shape:
        raise ValueError(f"label arrays differ in length: {m.shape} vs {c.shape}")
    return _renumber(list(zip(m.tolist(), c.tolist())))
