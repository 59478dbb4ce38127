"""Orientation procedures turning a learned skeleton into an interventional CPDAG."""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import stats as st
from .graphs import (
    Edge,
    InterventionFamily,
    PartiallyDirectedGraph,
    Polytree,
    connected_components,
    i_cpdag,
    orient_away,
)
from .skeleton import learn_skeleton
from .stats import Direction, SuffStats


class Procedure(str, Enum):
    P1 = "p1"
    P2 = "p2"


class Pairwise(str, Enum):
    BIC = "bic"
    IRC = "irc"


class ColliderMode(str, Enum):
    SIMPLE = "simple"
    REFINED = "refined"


def _enum(cls, value):
    return value if isinstance(value, cls) else cls(str(value).lower().replace(".", ""))


@dataclass(frozen=True)
class OrientationConfig:
    procedure: Procedure = Procedure.P2
    pairwise: Pairwise = Pairwise.IRC
    collider_mode: ColliderMode = ColliderMode.SIMPLE
    alpha: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "procedure", _enum(Procedure, self.procedure))
        object.__setattr__(self, "pairwise", _enum(Pairwise, self.pairwise))
        object.__setattr__(self, "collider_mode", _enum(ColliderMode, self.collider_mode))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    def label(self) -> str:
        return f"{self.procedure.value}-{self.pairwise.value}-{self.collider_mode.value}"


def _pair(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class OrientationState:
    """Unoriented edges ``E`` and oriented edges ``O`` partitioning a skeleton."""

    def __init__(self, skeleton: Iterable[Edge], oriented: Iterable[Edge] = ()):
        self.unoriented: set[Edge] = {_pair(u, v) for u, v in skeleton}
        self.oriented: set[Edge] = set()
        self._nbrs: dict[int, set[int]] = {}
        for u, v in self.unoriented:
            self._nbrs.setdefault(u, set()).add(v)
            self._nbrs.setdefault(v, set()).add(u)
        for u, v in oriented:
            self.orient(u, v)

    def copy(self) -> "OrientationState":
        out = OrientationState(())
        out.unoriented = set(self.unoriented)
        out.oriented = set(self.oriented)
        out._nbrs = {k: set(v) for k, v in self._nbrs.items()}
        return out

    def is_unoriented(self, u: int, v: int) -> bool:
        return _pair(u, v) in self.unoriented

    def unoriented_neighbours(self, v: int) -> list[int]:
        return sorted(self._nbrs.get(v, ()))

    def orient(self, u: int, v: int) -> None:
        pair = _pair(u, v)
        if pair not in self.unoriented:
            raise ValueError(f"{u} - {v} is not an unoriented edge")
        self.unoriented.remove(pair)
        self._nbrs[u].discard(v)
        self._nbrs[v].discard(u)
        self.oriented.add((u, v))

    def check(self) -> None:
        pairs = {_pair(u, v) for u, v in self.oriented}
        assert len(pairs) == len(self.oriented), "both directions of one pair oriented"
        assert not pairs & self.unoriented, "edge both oriented and unoriented"

    def to_graph(self, p: int) -> PartiallyDirectedGraph:
        return PartiallyDirectedGraph(p, frozenset(self.oriented), frozenset(self.unoriented))

    def __eq__(self, other) -> bool:
        return (isinstance(other, OrientationState) and self.unoriented == other.unoriented
                and self.oriented == other.oriented)


@dataclass
class _Tests:
    stats: SuffStats
    fam: InterventionFamily
    collider_mode: ColliderMode = ColliderMode.SIMPLE
    alpha: float = 0.05
    counts: Counter = field(default_factory=Counter)
    _seen: dict = field(default_factory=dict)

    def separated(self, u: int, w: int) -> bool:
        key = _pair(u, w)
        if key not in self._seen:
            self.counts["independence"] += 1
            self._seen[key] = st.collider_test_simple(u, -1, w, self.stats, self.fam)
        return self._seen[key]

    def collider_given(self, u: int, v: int, w: int) -> bool:
        """With ``u -> v`` known: does ``w`` point into ``v``?"""
        if self.collider_mode is ColliderMode.REFINED:
            self.counts["refined"] += 1
            return st.collider_test_refined(u, v, w, self.stats, self.fam)
        return self.separated(u, w)

    def pairwise(self, u: int, v: int, method: Pairwise) -> st.EdgeTestResult:
        if method is Pairwise.IRC:
            res = st.irc_orient_edge(u, v, self.stats, self.fam, self.alpha)
            self.counts["irc_tests"] += res.tests_run
        else:
            res = st.bic_orient_edge(u, v, self.stats, self.fam)
            self.counts["bic_edge"] += 1
        return res


def _as_tests(stats, fam, collider_mode, alpha=0.05, tests=None) -> _Tests:
    if tests is not None:
        return tests
    return _Tests(stats, fam, ColliderMode(collider_mode), alpha)


def collider_pass(
    state: OrientationState,
    stats: SuffStats,
    fam: InterventionFamily,
    collider_mode=ColliderMode.SIMPLE,
    _tests: _Tests | None = None,
) -> OrientationState:
    """Propagate from oriented heads and search unshielded triples until nothing changes."""
    t = _as_tests(stats, fam, collider_mode, tests=_tests)
    changed = True
    while changed:
        changed = False
        for u, v in sorted(state.oriented):
            for w in state.unoriented_neighbours(v):
                if not state.is_unoriented(v, w):
                    continue
                if t.collider_given(u, v, w):
                    state.orient(w, v)
                else:
                    state.orient(v, w)
                changed = True
        for v in sorted(state._nbrs):
            nbrs = state.unoriented_neighbours(v)
            for i, u in enumerate(nbrs):
                for w in nbrs[i + 1:]:
                    if not (state.is_unoriented(u, v) and state.is_unoriented(v, w)):
                        continue
                    if t.separated(u, w):
                        state.orient(u, v)
                        state.orient(w, v)
                        changed = True
        state.check()
    return state


def recursive_collider(
    state: OrientationState,
    stats: SuffStats,
    fam: InterventionFamily,
    seed_edge: Edge,
    collider_mode=ColliderMode.SIMPLE,
    _tests: _Tests | None = None,
) -> OrientationState:
    """Orient everything reachable through unoriented edges from the head of ``seed_edge``."""
    t = _as_tests(stats, fam, collider_mode, tests=_tests)
    stack = [(seed_edge, iter(state.unoriented_neighbours(seed_edge[1])))]
    while stack:
        (u, v), it = stack[-1]
        w = next(it, None)
        if w is None:
            stack.pop()
            continue
        if not state.is_unoriented(v, w):
            continue
        if t.collider_given(u, v, w):
            state.orient(w, v)
        else:
            state.orient(v, w)
            stack.append(((v, w), iter(state.unoriented_neighbours(w))))
    state.check()
    return state


def find_the_root(
    component: Sequence[int], edges: Sequence[Edge], stats: SuffStats, fam: InterventionFamily
) -> frozenset[Edge]:
    """Direct a component away from the vertex whose rooted model has the lowest BIC."""
    if not edges:
        return frozenset()
    scores = st.all_root_scores(edges, list(component), stats, fam)
    root = min(scores, key=lambda r: (scores[r].score, r))
    return orient_away(stats.p, edges, root)


@dataclass
class OrientationReport:
    config: str
    counts: dict
    seconds: float
    undecided: list[Edge]


def _finish(state: OrientationState, p: int, t: _Tests, cfg, start) -> tuple[PartiallyDirectedGraph, OrientationReport]:
    graph = state.to_graph(p)
    report = OrientationReport(cfg.label(), dict(t.counts), time.perf_counter() - start,
                               sorted(state.unoriented))
    return graph, report


def _config(config) -> OrientationConfig:
    return config if isinstance(config, OrientationConfig) else OrientationConfig(**(config or {}))


def procedure_1(
    skeleton: Iterable[Edge],
    stats: SuffStats,
    fam: InterventionFamily,
    config: OrientationConfig | None = None,
    return_report: bool = False,
):
    """Collider search first, then single-edge orientation of what is left."""
    cfg = _config(config)
    start = time.perf_counter()
    t = _Tests(stats, fam, cfg.collider_mode, cfg.alpha)
    state = OrientationState(skeleton)
    collider_pass(state, stats, fam, _tests=t)
    if cfg.pairwise is Pairwise.BIC:
        directed = set(state.oriented)
        residual = sorted(state.unoriented)
        touched = sorted({x for e in residual for x in e})
        for comp in connected_components(touched, residual):
            cset = set(comp)
            cedges = [e for e in residual if e[0] in cset]
            directed |= find_the_root(comp, cedges, stats, fam)
            t.counts["root_searches"] += 1
        cpdag = i_cpdag(Polytree(stats.p, frozenset(directed)), fam)
        state = OrientationState(cpdag.undirected, ())
        state.oriented = set(cpdag.directed)
    else:
        for u, v in sorted(state.unoriented):
            if not state.is_unoriented(u, v) or not fam.separates(u, v):
                continue
            res = t.pairwise(u, v, Pairwise.IRC)
            if res.direction is Direction.UNDECIDED:
                continue
            a, b = (u, v) if res.direction is Direction.U_TO_V else (v, u)
            state.orient(a, b)
            recursive_collider(state, stats, fam, (a, b), _tests=t)
    state.check()
    graph, report = _finish(state, stats.p, t, cfg, start)
    return (graph, report) if return_report else graph


def procedure_2(
    skeleton: Iterable[Edge],
    stats: SuffStats,
    fam: InterventionFamily,
    config: OrientationConfig | None = None,
    return_report: bool = False,
):
    """Single-edge orientation of every target-separated edge, then collider search."""
    cfg = _config(config)
    start = time.perf_counter()
    t = _Tests(stats, fam, cfg.collider_mode, cfg.alpha)
    state = OrientationState(skeleton)
    decisions = []
    for u, v in sorted(state.unoriented):
        if fam.separates(u, v):
            res = t.pairwise(u, v, cfg.pairwise)
            if res.direction is Direction.U_TO_V:
                decisions.append((u, v))
            elif res.direction is Direction.V_TO_U:
                decisions.append((v, u))
    for a, b in decisions:
        state.orient(a, b)
    collider_pass(state, stats, fam, _tests=t)
    graph, report = _finish(state, stats.p, t, cfg, start)
    return (graph, report) if return_report else graph


def orient(skeleton, stats, fam, config=None, return_report=False):
    cfg = _config(config)
    proc = procedure_1 if cfg.procedure is Procedure.P1 else procedure_2
    return proc(skeleton, stats, fam, cfg, return_report=return_report)


@dataclass
class LearnResult:
    graph: PartiallyDirectedGraph
    skeleton: frozenset[Edge]
    report: dict


def learn(
    data: Sequence[np.ndarray] | SuffStats,
    fam: InterventionFamily,
    aggregation="mean",
    config: OrientationConfig | None = None,
) -> LearnResult:
    """Skeleton by aggregated Chow-Liu, then the configured orientation procedure."""
    cfg = _config(config)
    t0 = time.perf_counter()
    stats = data if isinstance(data, SuffStats) else st.suff_stats(data)
    if len(fam) != stats.k:
        raise ValueError("need one target set per environment")
    fam.validate(stats.p)
    t1 = time.perf_counter()
    skel = learn_skeleton(stats, fam, aggregation)
    t2 = time.perf_counter()
    graph, orep = orient(skel, stats, fam, cfg, return_report=True)
    t3 = time.perf_counter()
    report = {
        "aggregation": str(getattr(aggregation, "value", aggregation)),
        "config": {"procedure": cfg.procedure.value, "pairwise": cfg.pairwise.value,
                   "collider": cfg.collider_mode.value, "alpha": cfg.alpha},
        "timings": {"stats": t1 - t0, "skeleton": t2 - t1, "orientation": t3 - t2, "total": t3 - t0},
        "tests": orep.counts,
        "undecided_edges": [list(e) for e in orep.undecided],
        "n_directed": len(graph.directed),
        "n_undirected": len(graph.undirected),
        "environments": int(stats.k),
        "samples": [int(n) for n in stats.ns],
    }
    return LearnResult(graph, skel, report)
