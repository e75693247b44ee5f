"""Exact one-dimensional k-means and the cluster-membership cooperation rule."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import ContractViolation

CP = "CP"
DF = "DF"
_DIRECT_COST_LIMIT = 128


def segment_ss(values) -> float:
    """Sum of squared deviations from the mean, with exactly-rounded sums."""
    values = [float(v) for v in values]
    mean = math.fsum(values) / len(values)
    return math.fsum((v - mean) ** 2 for v in values)


@dataclass
class ClusterAssignment:
    k: int
    labels: dict
    centers: list
    within_cluster_ss: float
    silhouette: float | None = None

    @property
    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for c in self.labels.values():
            counts[c] += 1
        return counts

    def members(self, cluster: int) -> list:
        return sorted(i for i, c in self.labels.items() if c == cluster)

    def to_dict(self) -> dict:
        return {"k": self.k,
                "labels": {str(i): c for i, c in sorted(self.labels.items())},
                "centers": list(self.centers),
                "within_cluster_ss": self.within_cluster_ss,
                "silhouette": self.silhouette}


def _sorted_items(values: dict):
    return sorted(values.items(), key=lambda kv: (float(kv[1]), kv[0]))


def _cost_matrix(x: np.ndarray) -> np.ndarray:
    n = len(x)
    cost = np.full((n, n), np.inf)
    if n <= _DIRECT_COST_LIMIT:
        for i in range(n):
            for j in range(i, n):
                cost[i, j] = segment_ss(x[i:j + 1])
        return cost
    centred = x - x.mean()
    s1 = np.concatenate([[0.0], np.cumsum(centred)])
    s2 = np.concatenate([[0.0], np.cumsum(centred ** 2)])
    for i in range(n):
        j = np.arange(i, n)
        cnt = j - i + 1
        seg1 = s1[j + 1] - s1[i]
        cost[i, i:] = np.maximum(s2[j + 1] - s2[i] - seg1 ** 2 / cnt, 0.0)
    return cost


def optimal_segments(x, k: int) -> list[tuple[int, int]]:
    """Optimal contiguous k-segmentation of sorted ``x`` as ``(start, stop)`` pairs.

    Among equal-cost boundaries the earliest one wins, so left clusters stay small.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    cost = _cost_matrix(x)
    # best[m, j]: minimal cost of splitting x[:j] into m segments
    best = np.full((k + 1, n + 1), np.inf)
    arg = np.zeros((k + 1, n + 1), dtype=np.int64)
    best[0, 0] = 0.0
    for m in range(1, k + 1):
        for j in range(m, n - (k - m) + 1):
            top, where = np.inf, m - 1
            for i in range(m - 1, j):
                c = best[m - 1, i] + cost[i, j - 1]
                if c < top:
                    top, where = c, i
            best[m, j], arg[m, j] = top, where
    bounds = []
    j = n
    for m in range(k, 0, -1):
        i = arg[m, j]
        bounds.append((int(i), int(j)))
        j = i
    return bounds[::-1]


def kmeans_1d(values: dict, k: int) -> ClusterAssignment:
    """Globally optimal 1-D k-means by dynamic programming over the sorted values.

    Cluster indices follow ascending centre order.
    """
    n = len(values)
    if not 1 <= k <= n:
        raise ContractViolation(f"k must lie in [1, {n}], got {k}")
    items = _sorted_items(values)
    ids = [i for i, _ in items]
    x = np.array([float(v) for _, v in items])
    segments = optimal_segments(x, k)
    labels, centers, ss = {}, [], []
    for c, (start, stop) in enumerate(segments):
        seg = x[start:stop]
        centers.append(math.fsum(seg.tolist()) / len(seg))
        ss.append(segment_ss(seg))
        for idx in range(start, stop):
            labels[ids[idx]] = c
    return ClusterAssignment(k, labels, centers, math.fsum(ss))


def silhouette(values: dict, labels: dict) -> float:
    """Mean silhouette; singleton clusters score 0."""
    ids = sorted(values)
    x = np.array([float(values[i]) for i in ids])
    lab = np.array([labels[i] for i in ids])
    clusters = np.unique(lab)
    if not 2 <= len(clusters) <= len(ids) - 1:
        raise ContractViolation("silhouette needs 2 <= k <= n-1")
    dist = np.abs(x[:, None] - x[None, :])
    scores = np.zeros(len(ids))
    for p in range(len(ids)):
        own = lab == lab[p]
        if own.sum() == 1:
            continue
        a = dist[p, own].sum() / (own.sum() - 1)
        b = min(dist[p, lab == c].mean() for c in clusters if c != lab[p])
        denom = max(a, b)
        scores[p] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def choose_k(values: dict, k_max: int) -> int:
    """k in [2, k_max] with the highest mean silhouette; fewer than 3 values gives 1."""
    n = len(values)
    if n < 3:
        return 1
    k_max = min(k_max, n - 1)
    if k_max < 2:
        raise ContractViolation(f"k_max must be >= 2, got {k_max}")
    best_k, best_s = 2, -np.inf
    for k in range(2, k_max + 1):
        s = silhouette(values, kmeans_1d(values, k).labels)
        if s > best_s:
            best_k, best_s = k, s
    return best_k


def cluster_values(values: dict, k: int | None = None, k_max: int | None = None) -> ClusterAssignment:
    """Cluster with a fixed ``k`` or, when ``k`` is None, the silhouette choice."""
    n = len(values)
    if k is None:
        k = choose_k(values, k_max if k_max is not None else max(2, min(n - 1, 5)))
    assignment = kmeans_1d(values, k)
    if 2 <= k <= n - 1:
        assignment.silhouette = silhouette(values, assignment.labels)
    return assignment


def fair_strategy(assignment: ClusterAssignment) -> dict:
    """Cooperate iff at least one other participant shares your cluster."""
    sizes = assignment.sizes
    return {i: CP if sizes[c] >= 2 else DF for i, c in sorted(assignment.labels.items())}


def as_profile(strategies: dict) -> tuple:
    return tuple(strategies[i] for i in sorted(strategies))
