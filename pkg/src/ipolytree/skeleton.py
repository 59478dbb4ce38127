"""Aggregated correlation weights and maximum-weight spanning trees."""

from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from .graphs import Edge, InterventionFamily
from .stats import RHO_CLIP, SuffStats, suff_stats


class AggregationMethod(str, Enum):
    FISHER = "fisher"
    MEAN = "mean"
    MEDIAN = "median"
    POOLED = "pooled"
    OBSERVATIONAL = "obs"


_ALIASES = {"itest": "fisher", "pooled_baseline": "pooled", "observational_baseline": "obs",
            "baseobs": "obs"}


def as_method(method) -> AggregationMethod:
    if isinstance(method, AggregationMethod):
        return method
    return AggregationMethod(_ALIASES.get(str(method).lower(), str(method).lower()))


def _weighted_lower_median(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Lower weighted median along axis 0."""
    order = np.argsort(values, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(values, order, axis=0)
    cum = np.cumsum(weights[order], axis=0)
    target = 0.5 * weights.sum() * (1 - 1e-12)
    idx = (cum < target).sum(axis=0)
    return np.take_along_axis(sorted_vals, idx[None], axis=0)[0]


def aggregate_weights(
    stats: SuffStats, method="mean", fam: InterventionFamily | None = None
) -> np.ndarray:
    """Symmetric ``p x p`` weight matrix; the diagonal is zero and unused."""
    method = as_method(method)
    p, k = stats.p, stats.k
    ns = stats.ns
    if method is AggregationMethod.POOLED:
        w = np.abs(stats.pooled_correlation())
    elif method is AggregationMethod.OBSERVATIONAL:
        obs = fam.observational if fam is not None else 0
        w = np.abs(stats.correlation(obs))
    elif method is AggregationMethod.MEDIAN:
        stack = np.empty((k, p, p))
        for i in range(k):
            stack[i] = np.abs(stats.correlation(i))
        w = _weighted_lower_median(stack.reshape(k, -1), ns.astype(float)).reshape(p, p)
    else:
        w = np.zeros((p, p))
        for i in range(k):
            r = np.abs(stats.correlation(i))
            if method is AggregationMethod.FISHER:
                r = np.minimum(r, RHO_CLIP)
                w -= 0.5 * ns[i] * np.log1p(-(r * r))
            else:
                w += ns[i] * r
        if method is AggregationMethod.MEAN:
            w /= ns.sum()
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    return w


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def max_weight_spanning_tree(w: np.ndarray) -> frozenset[Edge]:
    """Kruskal on the complete graph; ties go to the lexicographically smaller pair."""
    w = np.asarray(w, dtype=float)
    p = w.shape[0]
    if not np.isfinite(w).all():
        raise ValueError("weights must be finite")
    iu, ju = np.triu_indices(p, k=1)
    # triu_indices is already lexicographic, so a stable sort keeps that order on ties
    order = np.argsort(-w[iu, ju], kind="stable")
    uf = _UnionFind(p)
    tree = []
    for idx in order:
        a, b = int(iu[idx]), int(ju[idx])
        if uf.union(a, b):
            tree.append((a, b))
            if len(tree) == p - 1:
                break
    return frozenset(tree)


def learn_skeleton(
    data: Sequence[np.ndarray] | SuffStats, fam: InterventionFamily | None = None, method="mean"
) -> frozenset[Edge]:
    stats = data if isinstance(data, SuffStats) else suff_stats(data)
    if stats.p < 2:
        raise ValueError("need at least two variables")
    return max_weight_spanning_tree(aggregate_weights(stats, method, fam))
