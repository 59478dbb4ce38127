"""Ground-truth graphs, linear Gaussian SEM parameters and interventional samples."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import networkx as nx
import numpy as np

from .graphs import Dag, Edge, InterventionFamily, Polytree

COEF_RANGE = (0.5, 2.0)
NOISE_RANGE = (0.05, 0.15)
INTERVENTION_VARIANCE = 0.5
MEAN_OFFSET = 5.0
MEAN_JITTER_VAR = 2.0


class InterventionKind(str, Enum):
    PERFECT = "perfect"
    MEAN_SHIFT = "mean_shift"
    INHIBITORY = "inhibitory"
    FLIPPED = "flipped"


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def prufer_decode(seq: Sequence[int], p: int) -> list[Edge]:
    """Labelled tree on ``p`` vertices encoded by a Prüfer sequence of length ``p - 2``."""
    if p == 1:
        return []
    if p == 2:
        return [(0, 1)]
    degree = [1] * p
    for x in seq:
        degree[x] += 1
    leaves = [i for i in range(p) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((min(leaf, x), max(leaf, x)))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, x)
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, v))
    return sorted(edges)


def prufer_encode(edges: Sequence[Edge], p: int) -> list[int]:
    adj: list[set[int]] = [set() for _ in range(p)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    leaves = [i for i in range(p) if len(adj[i]) == 1]
    heapq.heapify(leaves)
    seq = []
    for _ in range(p - 2):
        leaf = heapq.heappop(leaves)
        (nbr,) = adj[leaf]
        seq.append(nbr)
        adj[nbr].discard(leaf)
        adj[leaf].clear()
        if len(adj[nbr]) == 1:
            heapq.heappush(leaves, nbr)
    return seq


def random_tree(p: int, seed=None) -> list[Edge]:
    """Uniform labelled tree via a uniform Prüfer sequence."""
    rng = as_rng(seed)
    seq = rng.integers(0, p, size=max(p - 2, 0)).tolist()
    return prufer_decode(seq, p)


def random_polytree(p: int, seed=None) -> Polytree:
    """Uniform labelled tree with every edge direction an independent fair coin."""
    if p < 2:
        raise ValueError("p must be at least 2")
    rng = as_rng(seed)
    tree = random_tree(p, rng)
    flips = rng.random(len(tree)) < 0.5
    edges = frozenset((v, u) if f else (u, v) for (u, v), f in zip(tree, flips))
    return Polytree(p, edges)


def random_orientation(tree_edges, p: int, seed=None) -> Polytree:
    rng = as_rng(seed)
    tree = sorted(tree_edges)
    flips = rng.random(len(tree)) < 0.5
    return Polytree(p, frozenset((v, u) if f else (u, v) for (u, v), f in zip(tree, flips)))


def random_dag(p: int, e: float, model: str = "erdos_renyi", seed=None) -> Dag:
    """Random DAG with about ``e`` expected edges per node.

    Erdős–Rényi keeps each forward pair of a random vertex order with
    probability ``e / (p - 1)``; Barabási–Albert attaches ``round(e)`` edges per
    arriving vertex, oriented from older to newer vertex.
    """
    if p < 2 or e < 0:
        raise ValueError("need p >= 2 and e >= 0")
    rng = as_rng(seed)
    order = rng.permutation(p)
    if model == "erdos_renyi":
        prob = min(e / (p - 1), 1.0)
        iu, ju = np.triu_indices(p, k=1)
        keep = rng.random(iu.size) < prob
        edges = zip(order[iu[keep]].tolist(), order[ju[keep]].tolist())
    elif model == "barabasi_albert":
        m = int(round(e))
        if m == 0:
            return Dag(p, frozenset())
        m = min(m, p - 1)
        ba = nx.barabasi_albert_graph(p, m, seed=int(rng.integers(2**31)))
        edges = ((order[min(a, b)], order[max(a, b)]) for a, b in ba.edges())
    else:
        raise ValueError(f"unknown DAG model {model!r}")
    return Dag(p, frozenset((int(a), int(b)) for a, b in edges))


@dataclass(frozen=True)
class EnvironmentParams:
    """Effective SEM parameters of one environment."""

    targets: frozenset[int]
    weights: np.ndarray  # aligned with SemParams.edges
    omega: np.ndarray
    mean: np.ndarray


@dataclass(frozen=True)
class SemParams:
    graph: Dag
    edges: tuple[Edge, ...]
    weights: np.ndarray
    omega: np.ndarray
    environments: tuple[EnvironmentParams, ...]
    kind: InterventionKind = InterventionKind.PERFECT

    def coefficient_matrix(self, env: int | None = None) -> np.ndarray:
        """Dense ``Lambda`` with ``Lambda[w, v]`` the coefficient of ``w -> v``."""
        w = self.weights if env is None else self.environments[env].weights
        lam = np.zeros((self.graph.n, self.graph.n))
        for (a, b), c in zip(self.edges, w):
            lam[a, b] = c
        return lam


def _draw_coefficients(rng: np.random.Generator, size: int) -> np.ndarray:
    mag = rng.uniform(*COEF_RANGE, size=size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return mag * sign


def draw_params(
    g: Dag,
    fam: InterventionFamily,
    kind: InterventionKind | str = InterventionKind.PERFECT,
    seed=None,
) -> SemParams:
    """Observational coefficients and noise plus per-environment overrides.

    Every intervened vertex receives a mean ``5 * sign(m) + m`` with
    ``m ~ N(0, 2)`` and noise variance 0.5.  Coefficients into it are zeroed
    (perfect), kept (mean_shift), scaled by 0.1 (inhibitory) or negated
    (flipped).
    """
    kind = InterventionKind(kind)
    fam.validate(g.n)
    rng = as_rng(seed)
    edges = tuple(sorted(g.edges))
    weights = _draw_coefficients(rng, len(edges))
    omega = rng.uniform(*NOISE_RANGE, size=g.n)
    dst = np.array([b for _, b in edges], dtype=int)
    envs = []
    for targets in fam:
        w = weights.copy()
        om = omega.copy()
        mu = np.zeros(g.n)
        if targets:
            tmask = np.zeros(g.n, dtype=bool)
            tmask[list(targets)] = True
            into = tmask[dst] if len(edges) else np.zeros(0, dtype=bool)
            if kind is InterventionKind.PERFECT:
                w[into] = 0.0
            elif kind is InterventionKind.INHIBITORY:
                w[into] *= 0.1
            elif kind is InterventionKind.FLIPPED:
                w[into] *= -1.0
            idx = sorted(targets)
            jitter = rng.normal(0.0, np.sqrt(MEAN_JITTER_VAR), size=len(idx))
            mu[idx] = MEAN_OFFSET * np.sign(jitter) + jitter
            om[idx] = INTERVENTION_VARIANCE
        envs.append(EnvironmentParams(targets, w, om, mu))
    return SemParams(g, edges, weights, omega, tuple(envs), kind)


def sample_environment(params: SemParams, env: int, n: int, seed=None) -> np.ndarray:
    """``n`` rows drawn by forward substitution in topological order."""
    rng = as_rng(seed)
    g = params.graph
    e = params.environments[env]
    eps = rng.standard_normal((n, g.n)) * np.sqrt(e.omega) + e.mean
    incoming: list[list[tuple[int, float]]] = [[] for _ in range(g.n)]
    for (a, b), c in zip(params.edges, e.weights):
        if c != 0.0:
            incoming[b].append((a, c))
    x = np.empty((n, g.n))
    for v in g.topological_order:
        col = eps[:, v].copy()
        for a, c in incoming[v]:
            col += c * x[:, a]
        x[:, v] = col
    return x


def sample(params: SemParams, sizes: Sequence[int], seed=None) -> list[np.ndarray]:
    """One sample matrix per environment; environments use independent child streams."""
    if len(sizes) != len(params.environments):
        raise ValueError("need one sample size per environment")
    if isinstance(seed, np.random.Generator):
        rngs = seed.spawn(len(sizes))
    else:
        rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(sizes))]
    return [sample_environment(params, i, int(n), r) for i, (n, r) in enumerate(zip(sizes, rngs))]


def even_sizes(n_total: int, k: int) -> list[int]:
    base, extra = divmod(n_total, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def trek_rule_covariance(params: SemParams, env: int | None = None) -> np.ndarray:
    """Population covariance from the trek rule.

    Sums ``omega_top * prod(lambda)`` over every pair of directed paths leaving a
    common top.  Directed path weights are accumulated by dynamic programming
    in topological order, so no matrix inverse is involved.  Polytrees take a
    faster route over their unique simple treks.
    """
    if env is None:
        weights, omega = params.weights, params.omega
    else:
        weights, omega = params.environments[env].weights, params.environments[env].omega
    g = params.graph
    if isinstance(g, Polytree):
        return _polytree_treks(g, params.edges, weights, omega)
    p = g.n
    incoming: list[list[tuple[int, float]]] = [[] for _ in range(p)]
    for (a, b), c in zip(params.edges, weights):
        incoming[b].append((a, c))
    # paths[t, v] = total weight of directed paths t ~> v
    paths = np.zeros((p, p))
    for v in g.topological_order:
        paths[v, v] = 1.0
        for a, c in incoming[v]:
            paths[:, v] += c * paths[:, a]
    return (paths * omega[:, None]).T @ paths


def _polytree_treks(g: Polytree, edges, weights, omega) -> np.ndarray:
    p = g.n
    coef = {}
    for (a, b), c in zip(edges, weights):
        coef[(a, b)] = c
    var = np.zeros(p)
    for v in g.topological_order:
        var[v] = omega[v] + sum(coef[(a, v)] ** 2 * var[a] for a in g.parents[v])
    sigma = np.zeros((p, p))
    for s in range(p):
        sigma[s, s] = var[s]
        # walk from s: first against the arrows (towards the top), then along them
        stack = [(s, -1, 1.0, s, True)]
        while stack:
            a, prev, prod, top, rising = stack.pop()
            if a != s:
                sigma[s, a] = prod * var[top]
            if rising:
                for b in g.parents[a]:
                    if b != prev:
                        stack.append((b, a, prod * coef[(b, a)], b, True))
            for b in g.children[a]:
                if b != prev:
                    stack.append((b, a, prod * coef[(a, b)], top, False))
    return sigma


def matrix_covariance(params: SemParams, env: int | None = None) -> np.ndarray:
    """``(I - L^T)^{-1} Omega (I - L)^{-1}`` by dense linear algebra."""
    lam = params.coefficient_matrix(env)
    omega = params.omega if env is None else params.environments[env].omega
    inv = np.linalg.inv(np.eye(lam.shape[0]) - lam)
    return inv.T @ np.diag(omega) @ inv


def random_family(
    p: int,
    n_interventions: int,
    targets_per: int,
    seed=None,
    distinct: bool = True,
) -> InterventionFamily:
    """Observational environment followed by ``n_interventions`` random target sets."""
    rng = as_rng(seed)
    fam = [frozenset()]
    if targets_per == 1 and distinct and n_interventions <= p:
        nodes = rng.choice(p, size=n_interventions, replace=False)
        fam += [frozenset([int(v)]) for v in nodes]
    else:
        for _ in range(n_interventions):
            fam.append(frozenset(int(v) for v in rng.choice(p, size=min(targets_per, p), replace=False)))
    return InterventionFamily(fam)
