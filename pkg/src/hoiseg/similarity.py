"""Multi-dimensional DTW, DTW barycenter averaging and confidence matrices."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numba as nb
import numpy as np

logger = logging.getLogger(__name__)


@nb.njit(cache=True)
def _cost_matrix(a, b):
    n, m, d = a.shape[0], b.shape[0], a.shape[1]
    c = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                s += diff * diff
            c[i, j] = np.sqrt(s)
    return c


@nb.njit(cache=True)
def _accumulate(c, window):
    n, m = c.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        lo, hi = 1, m
        if window >= 0:
            lo = max(1, i - window)
            hi = min(m, i + window)
        for j in range(lo, hi + 1):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = c[i - 1, j - 1] + best
    return acc


@nb.njit(cache=True)
def _backtrack(acc):
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = []
    while i > 0 and j > 0:
        path.append((i - 1, j - 1))
        d, u, l = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
        if d <= u and d <= l:
            i -= 1
            j -= 1
        elif u <= l:
            i -= 1
        else:
            j -= 1
    return path[::-1]


def _as_seq(x) -> np.ndarray:
    a = np.ascontiguousarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def _check_pair(a, b):
    if len(a) == 0 or len(b) == 0:
        raise ValueError("DTW needs non-empty sequences")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")


def _window_arg(window, n, m) -> int:
    if window is None:
        return -1
    # a band narrower than the length difference admits no path
    return max(int(window), abs(n - m))


def dtw_distance(a, b, window: int | None = None) -> float:
    """Dependent multi-dimensional DTW with Euclidean frame cost.

    Steps are (1,0), (0,1), (1,1); the result is the raw accumulated cost of
    the optimal path. ``window`` is an optional Sakoe-Chiba half width.
    """
    a, b = _as_seq(a), _as_seq(b)
    _check_pair(a, b)
    acc = _accumulate(_cost_matrix(a, b), _window_arg(window, len(a), len(b)))
    return float(acc[-1, -1])


def dtw_path(a, b, window: int | None = None):
    a, b = _as_seq(a), _as_seq(b)
    _check_pair(a, b)
    acc = _accumulate(_cost_matrix(a, b), _window_arg(window, len(a), len(b)))
    return float(acc[-1, -1]), _backtrack(acc)


def resample(seq, length: int) -> np.ndarray:
    s = _as_seq(seq)
    if length == len(s):
        return s.copy()
    src = np.linspace(0.0, 1.0, len(s)) if len(s) > 1 else np.zeros(1)
    dst = np.linspace(0.0, 1.0, length)
    if len(s) == 1:
        return np.repeat(s, length, axis=0)
    return np.stack([np.interp(dst, src, s[:, k]) for k in range(s.shape[1])], axis=1)


def medoid_index(seqs, window=None) -> int:
    n = len(seqs)
    tot = np.zeros(n)
    for i, j in itertools.combinations(range(n), 2):
        d = dtw_distance(seqs[i], seqs[j], window)
        tot[i] += d
        tot[j] += d
    return int(np.argmin(tot))


@dataclass
class Barycenter:
    sequence: np.ndarray
    objective: list[float] = field(default_factory=list)


@nb.njit(cache=True)
def _align_sums(center, flat, offsets, window):
    """Align every sequence to ``center``; return per-frame sums, counts and
    the mean DTW distance (the objective of ``center``)."""
    n, d = center.shape
    sums = np.zeros((n, d))
    counts = np.zeros(n)
    total = 0.0
    for q in range(len(offsets) - 1):
        s = flat[offsets[q]:offsets[q + 1]]
        m = s.shape[0]
        w = window
        if w >= 0 and w < abs(n - m):
            w = abs(n - m)
        acc = _accumulate(_cost_matrix(center, s), w)
        total += acc[n, m]
        i, j = n, m
        while i > 0 and j > 0:
            for k in range(d):
                sums[i - 1, k] += s[j - 1, k]
            counts[i - 1] += 1
            dg, up, lf = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if dg <= up and dg <= lf:
                i -= 1
                j -= 1
            elif up <= lf:
                i -= 1
            else:
                j -= 1
    return sums, counts, total / (len(offsets) - 1)


def _pack(seqs):
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(s) for s in seqs])
    return np.ascontiguousarray(np.concatenate(seqs, axis=0)), offsets


def _dba_update(center, seqs, window):
    flat, offsets = _pack(seqs)
    sums, counts, _ = _align_sums(center, flat, offsets, -1 if window is None else int(window))
    return sums / counts[:, None]


def _mean_distance(center, seqs, window):
    return float(np.mean([dtw_distance(center, s, window) for s in seqs]))


def dtw_barycenter(seqs, target_len: int | None = None, iters: int = 10,
                   window: int | None = None, tol: float = 1e-9,
                   return_trace: bool = False, init=None):
    """DTW barycenter averaging.

    Starts from ``init`` or else the medoid, resampled to ``target_len``
    (median input length by default), then alternates alignment and
    per-frame averaging. An update is kept only if it does not raise the mean
    DTW distance, so the objective trace never increases.
    """
    seqs = [_as_seq(s) for s in seqs]
    if not seqs:
        raise ValueError("dtw_barycenter needs at least one sequence")
    dims = {s.shape[1] for s in seqs}
    if len(dims) != 1:
        raise ValueError(f"sequences disagree on dimension: {sorted(dims)}")
    if target_len is None:
        target_len = int(np.median([len(s) for s in seqs]))
    start = seqs[medoid_index(seqs, window)] if init is None else _as_seq(init)
    center = np.ascontiguousarray(resample(start, target_len))
    flat, offsets = _pack(seqs)
    w = -1 if window is None else int(window)
    sums, counts, obj = _align_sums(center, flat, offsets, w)
    trace = [obj]
    for _ in range(iters):
        cand = sums / counts[:, None]
        c_sums, c_counts, cand_obj = _align_sums(cand, flat, offsets, w)
        if not cand_obj <= obj:
            break
        # ties are taken: the mean frame is the natural centre of a flat objective
        gain = obj - cand_obj
        center, obj, sums, counts = cand, cand_obj, c_sums, c_counts
        trace.append(obj)
        if gain < tol:
            break
    if return_trace:
        return Barycenter(center, trace)
    return center


@dataclass
class ConfidenceMatrix:
    values: np.ndarray
    labels: list
    scale: float
    degenerate: bool = False


def _normalize(raw: np.ndarray, labels) -> ConfidenceMatrix:
    top = float(raw.max()) if raw.size else 0.0
    if top <= 0.0:
        logger.warning("all pairwise distances are zero; matrix left unscaled")
        return ConfidenceMatrix(raw.copy(), list(labels), 1.0, True)
    return ConfidenceMatrix(raw / top, list(labels), top, False)


def pairwise_distances(seqs, window=None) -> np.ndarray:
    n = len(seqs)
    d = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        d[i, j] = d[j, i] = dtw_distance(seqs[i], seqs[j], window)
    return d


def confidence_matrix(seqs, labels=None, window=None) -> ConfidenceMatrix:
    """Pairwise DTW distances scaled by their maximum into [0, 1]."""
    if len(seqs) < 2:
        raise ValueError("need at least two sequences")
    labels = list(labels) if labels is not None else list(range(len(seqs)))
    return _normalize(pairwise_distances(seqs, window), labels)


def multi_subject_matrix(cells: dict, window=None) -> ConfidenceMatrix:
    """Average DTW over repetition pairs for every (type, subject) couple.

    ``cells`` maps ``(type, subject, rep)`` to a sequence and must cover the
    full grid.
    """
    types = sorted({k[0] for k in cells})
    subjects = sorted({k[1] for k in cells})
    reps = sorted({k[2] for k in cells})
    for key in itertools.product(types, subjects, reps):
        if key not in cells:
            raise KeyError(f"missing cell (type={key[0]!r}, subject={key[1]!r}, rep={key[2]!r})")
    rows = list(itertools.product(types, subjects))
    seqs = {k: _as_seq(v) for k, v in cells.items()}
    n = len(rows)
    raw = np.zeros((n, n))
    for p in range(n):
        for q in range(p, n):
            (a, x), (b, y) = rows[p], rows[q]
            tot = sum(dtw_distance(seqs[(a, x, m)], seqs[(b, y, r)], window)
                      for m in reps for r in reps)
            raw[p, q] = raw[q, p] = tot / len(reps) ** 2
    return _normalize(raw, rows)
