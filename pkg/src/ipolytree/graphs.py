"""Graph types, interventional equivalence and the CPDAG Hamming distance.

Vertices are dense integers ``0..p-1``.  All graph objects are immutable.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

Edge = tuple[int, int]


class GraphError(ValueError):
    """Raised when a graph violates its structural invariants."""


def _undirected(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on vertices ``0..n-1``."""

    n: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset((int(u), int(v)) for u, v in self.edges))
        if self.n < 1:
            raise GraphError("a graph needs at least one vertex")
        seen: set[Edge] = set()
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={self.n}")
            pair = _undirected(u, v)
            if pair in seen:
                raise GraphError(f"more than one edge between {u} and {v}")
            seen.add(pair)
        if len(self.topological_order) != self.n:
            raise GraphError("graph contains a directed cycle")

    @cached_property
    def parents(self) -> tuple[tuple[int, ...], ...]:
        pa: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            pa[v].append(u)
        return tuple(tuple(x) for x in pa)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        ch: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            ch[u].append(v)
        return tuple(tuple(x) for x in ch)

    @cached_property
    def topological_order(self) -> tuple[int, ...]:
        indeg = [0] * self.n
        ch: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            indeg[v] += 1
            ch[u].append(v)
        queue = deque(sorted(i for i in range(self.n) if indeg[i] == 0))
        order = []
        while queue:
            u = queue.popleft()
            order.append(u)
            for v in sorted(ch[u]):
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
        return tuple(order)

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges

    def adjacent(self, u: int, v: int) -> bool:
        return (u, v) in self.edges or (v, u) in self.edges

    def to_pdag(self) -> "PartiallyDirectedGraph":
        return PartiallyDirectedGraph(self.n, self.edges, frozenset())


class Polytree(Dag):
    """A DAG whose skeleton is a spanning tree."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if len(self.edges) != self.n - 1 or not _is_connected(self.n, skeleton(self)):
            raise GraphError("skeleton is not a spanning tree")

    @classmethod
    def from_dag(cls, g: Dag) -> "Polytree":
        return cls(g.n, g.edges)


@dataclass(frozen=True)
class PartiallyDirectedGraph:
    """Simple mixed graph on ``0..n-1``; undirected edges are stored as ``(min, max)``."""

    n: int
    directed: frozenset[Edge] = field(default_factory=frozenset)
    undirected: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        directed = frozenset((int(u), int(v)) for u, v in self.directed)
        undirected = frozenset(_undirected(int(u), int(v)) for u, v in self.undirected)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        seen: set[Edge] = set()
        for u, v in itertools.chain(directed, undirected):
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"invalid edge ({u}, {v}) for n={self.n}")
            pair = _undirected(u, v)
            if pair in seen:
                raise GraphError(f"more than one edge between {u} and {v}")
            seen.add(pair)

    @cached_property
    def skeleton(self) -> frozenset[Edge]:
        return frozenset(_undirected(u, v) for u, v in self.directed) | self.undirected

    def mark(self, u: int, v: int) -> str | None:
        """Return ``'->'``, ``'<-'``, ``'--'`` for the pair as seen from ``u``, or ``None``."""
        if (u, v) in self.directed:
            return "->"
        if (v, u) in self.directed:
            return "<-"
        if _undirected(u, v) in self.undirected:
            return "--"
        return None

    def has_directed_cycle(self) -> bool:
        try:
            Dag(self.n, self.directed)
        except GraphError:
            return True
        return False


@dataclass(frozen=True)
class InterventionFamily:
    """Ordered intervention targets, one entry per environment."""

    targets: tuple[frozenset[int], ...]

    def __init__(self, targets: Iterable[Iterable[int]]):
        object.__setattr__(self, "targets", tuple(frozenset(int(x) for x in t) for t in targets))
        if not any(len(t) == 0 for t in self.targets):
            raise GraphError("intervention family must contain the empty (observational) target")

    def __len__(self) -> int:
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    def __getitem__(self, i: int) -> frozenset[int]:
        return self.targets[i]

    def validate(self, n: int) -> None:
        for t in self.targets:
            for x in t:
                if not 0 <= x < n:
                    raise GraphError(f"target {x} out of range for n={n}")

    @property
    def observational(self) -> int:
        """Index of the first environment with an empty target set."""
        return next(i for i, t in enumerate(self.targets) if not t)

    def intervened(self, v: int) -> list[int]:
        """Environments in which ``v`` is a target."""
        return [i for i, t in enumerate(self.targets) if v in t]

    def not_intervened(self, v: int) -> list[int]:
        return [i for i, t in enumerate(self.targets) if v not in t]

    def only(self, u: int, v: int) -> list[int]:
        """Environments targeting ``u`` but not ``v``."""
        return [i for i, t in enumerate(self.targets) if u in t and v not in t]

    def separates(self, u: int, v: int) -> bool:
        return any((u in t) != (v in t) for t in self.targets)


@dataclass(frozen=True)
class ShdResult:
    distance: int
    additions: int
    deletions: int
    reversals: int


def skeleton(g: Dag | PartiallyDirectedGraph) -> frozenset[Edge]:
    if isinstance(g, PartiallyDirectedGraph):
        return g.skeleton
    return frozenset(_undirected(u, v) for u, v in g.edges)


def _is_connected(n: int, edges: Iterable[Edge]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def unshielded_colliders(g: Dag) -> frozenset[tuple[int, int, int]]:
    """All ``u -> v <- w`` with ``u < w`` and ``u``, ``w`` non-adjacent."""
    out = set()
    for v, pa in enumerate(g.parents):
        for u, w in itertools.combinations(pa, 2):
            if not g.adjacent(u, w):
                out.add((min(u, w), v, max(u, w)))
    return frozenset(out)


def find_colliders(g: Dag) -> frozenset[tuple[int, int, int]]:
    """Colliders of a polytree, canonicalised as ``(u, v, w)`` with ``u < w``."""
    if not isinstance(g, Polytree):
        g = Polytree.from_dag(g)
    return unshielded_colliders(g)


def i_dag(g: Dag, fam: InterventionFamily | Sequence[Iterable[int]]) -> Dag:
    """Append one vertex per nonempty target, pointing into each of its targets.

    The added vertices take indices ``n, n+1, ...`` in family order.
    """
    targets = fam.targets if isinstance(fam, InterventionFamily) else [frozenset(t) for t in fam]
    edges = set(g.edges)
    z = g.n
    for t in targets:
        if not t:
            continue
        edges.update((z, u) for u in t)
        z += 1
    return Dag(z, frozenset(edges))


def _augmented_families(fam: InterventionFamily) -> list[list[frozenset[int]]]:
    targets = list(dict.fromkeys(fam.targets))
    out = []
    for i in targets:
        fam_i = [frozenset()]
        for j in targets:
            if i != j:
                k = i | j
                if k not in fam_i:
                    fam_i.append(k)
        out.append(fam_i)
    return out


def i_mec_signature(g: Dag, fam: InterventionFamily) -> tuple:
    """Hashable summary that two DAGs share iff they are interventionally Markov equivalent."""
    sig = []
    for fam_i in _augmented_families(fam):
        aug = i_dag(g, fam_i)
        sig.append((skeleton(aug), unshielded_colliders(aug)))
    return tuple(sig)


def i_mec_equal(g1: Dag, g2: Dag, fam: InterventionFamily) -> bool:
    if g1.n != g2.n:
        raise GraphError("graphs must share their vertex set")
    return i_mec_signature(g1, fam) == i_mec_signature(g2, fam)


def i_cpdag(g: Dag, fam: InterventionFamily) -> PartiallyDirectedGraph:
    """Interventional CPDAG of a polytree.

    An edge stays directed when it belongs to a collider, is separated by a
    target set, or has an identifiable edge pointing into its tail.
    """
    if not isinstance(g, Polytree):
        g = Polytree.from_dag(g)
    identified: set[Edge] = set()
    queue: deque[Edge] = deque()
    for u, v in sorted(g.edges):
        if len(g.parents[v]) > 1 or fam.separates(u, v):
            identified.add((u, v))
            queue.append((u, v))
    while queue:
        _, v = queue.popleft()
        for w in g.children[v]:
            if (v, w) not in identified:
                identified.add((v, w))
                queue.append((v, w))
    undirected = frozenset(_undirected(u, v) for u, v in g.edges if (u, v) not in identified)
    return PartiallyDirectedGraph(g.n, frozenset(identified), undirected)


def shd_cpdag(g1: PartiallyDirectedGraph | Dag, g2: PartiallyDirectedGraph | Dag) -> ShdResult:
    """Hamming distance between mixed graphs: one unit per differing vertex pair.

    The breakdown reads as edits turning ``g1`` into ``g2``; any mark change on
    a shared pair counts as a reversal.
    """
    if isinstance(g1, Dag):
        g1 = g1.to_pdag()
    if isinstance(g2, Dag):
        g2 = g2.to_pdag()
    if g1.n != g2.n:
        raise GraphError("graphs must have the same number of vertices")
    s1, s2 = g1.skeleton, g2.skeleton
    additions = len(s2 - s1)
    deletions = len(s1 - s2)
    reversals = sum(1 for u, v in s1 & s2 if g1.mark(u, v) != g2.mark(u, v))
    return ShdResult(additions + deletions + reversals, additions, deletions, reversals)


def skeleton_shd(a: Iterable[Edge], b: Iterable[Edge]) -> int:
    """Symmetric difference size of two undirected edge sets."""
    sa = {_undirected(u, v) for u, v in a}
    sb = {_undirected(u, v) for u, v in b}
    return len(sa ^ sb)


def orient_away(n: int, edges: Iterable[Edge], root: int) -> frozenset[Edge]:
    """Direct the edges of an undirected tree (or subtree) away from ``root``."""
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    out = set()
    seen = {root}
    stack = [root]
    while stack:
        a = stack.pop()
        for b in adj.get(a, ()):
            if b not in seen:
                seen.add(b)
                out.add((a, b))
                stack.append(b)
    return frozenset(out)


def connected_components(vertices: Iterable[int], edges: Iterable[Edge]) -> list[list[int]]:
    adj: dict[int, list[int]] = {v: [] for v in vertices}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    seen: set[int] = set()
    comps = []
    for s in sorted(adj):
        if s in seen:
            continue
        comp = []
        stack = [s]
        seen.add(s)
        while stack:
            a = stack.pop()
            comp.append(a)
            for b in adj[a]:
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        comps.append(sorted(comp))
    return comps
