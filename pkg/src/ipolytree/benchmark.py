"""Simulation grid: skeleton, orientation and end-to-end SHD per seed."""

from __future__ import annotations

import csv
import itertools
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import synth
from .graphs import i_cpdag, shd_cpdag, skeleton, skeleton_shd
from .orientation import OrientationConfig, orient
from .skeleton import learn_skeleton
from .stats import suff_stats

METRICS = ("skeleton_shd", "orientation_shd", "full_shd", "random_shd")
TIMINGS = ("t_skeleton", "t_orientation", "t_full")


def parse_config(label: str) -> OrientationConfig:
    """``"p2-irc-simple"`` to a config."""
    parts = label.lower().split("-")
    if len(parts) != 3:
        raise ValueError(f"config label must look like 'p2-irc-simple', got {label!r}")
    return OrientationConfig(*parts)


@dataclass
class BenchmarkSpec:
    """Cartesian grid of simulation settings.

    ``environments`` counts data sets including the observational one.
    ``obs_fraction`` of ``None`` splits ``n`` evenly; otherwise the
    observational set gets that share and the rest is split evenly.
    """

    p: Sequence[int] = (50,)
    n: Sequence[int] = (1000,)
    environments: Sequence[int] = (6,)
    targets_per: Sequence[int] = (1,)
    kind: Sequence[str] = ("perfect",)
    aggregation: Sequence[str] = ("mean",)
    configs: Sequence[str] = ("p2-irc-simple",)
    seeds: Sequence[int] = (0,)
    obs_fraction: Sequence[float | None] = (None,)
    alpha: float = 0.05
    stages: Sequence[str] = ("skeleton", "orientation", "full")

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        for name in ("p", "n", "environments", "targets_per"):
            if any(int(x) <= 0 for x in getattr(self, name)):
                raise ValueError(f"{name} values must be positive")
        if any(e < 1 for e in self.environments):
            raise ValueError("environments must be at least 1")
        for w in self.obs_fraction:
            if w is not None and not 0 < w < 1:
                raise ValueError("obs_fraction must lie in (0, 1)")
        for c in self.configs:
            parse_config(c)

    def points(self) -> list[dict]:
        keys = ("p", "n", "environments", "targets_per", "kind", "obs_fraction",
                "aggregation", "configs", "seeds")
        out = []
        for combo in itertools.product(*(getattr(self, k) for k in keys)):
            pt = dict(zip(keys, combo))
            pt["config"] = pt.pop("configs")
            pt["seed"] = pt.pop("seeds")
            out.append(pt)
        return out


def _sizes(n: int, d: int, w_o: float | None) -> list[int]:
    if w_o in (None, "") or d == 1:
        return synth.even_sizes(n, d)
    n_obs = int(round(w_o * n))
    return [n_obs] + synth.even_sizes(n - n_obs, d - 1)


def _seed(pt: dict, *keys: str) -> np.random.SeedSequence:
    key = "|".join(str(pt[k]) for k in keys)
    return np.random.SeedSequence([int(pt["seed"]), zlib.crc32(key.encode())])


def simulate_point(pt: dict):
    # the model depends only on (seed, p, d, k, kind) so that sample budgets are compared on the
    # same graph; samples also depend on (n, w_o); no draw depends on aggregation or config
    graph_ss, fam_ss, par_ss, rand_ss = _seed(pt, "p", "environments", "targets_per", "kind").spawn(4)
    (data_ss,) = _seed(pt, "p", "n", "environments", "targets_per", "kind", "obs_fraction").spawn(1)
    p, d = int(pt["p"]), int(pt["environments"])
    g = synth.random_polytree(p, np.random.default_rng(graph_ss))
    fam = synth.random_family(p, d - 1, int(pt["targets_per"]), np.random.default_rng(fam_ss))
    params = synth.draw_params(g, fam, pt["kind"], np.random.default_rng(par_ss))
    data = synth.sample(params, _sizes(int(pt["n"]), d, pt["obs_fraction"]), np.random.default_rng(data_ss))
    return g, fam, data, np.random.default_rng(rand_ss)


def run_point(pt: dict, alpha: float = 0.05, stages=("skeleton", "orientation", "full")) -> dict:
    g, fam, data, rand_rng = simulate_point(pt)
    cfg = parse_config(pt["config"])
    cfg = OrientationConfig(cfg.procedure, cfg.pairwise, cfg.collider_mode, alpha)
    truth = i_cpdag(g, fam)
    true_skel = skeleton(g)
    stats = suff_stats(data)
    row = dict(pt)
    row["obs_fraction"] = "" if pt["obs_fraction"] is None else pt["obs_fraction"]
    row.update({m: "" for m in METRICS + TIMINGS})

    t0 = time.perf_counter()
    skel = learn_skeleton(stats, fam, pt["aggregation"])
    t1 = time.perf_counter()
    row["skeleton_shd"] = skeleton_shd(skel, true_skel)
    row["t_skeleton"] = t1 - t0
    if "orientation" in stages:
        t0 = time.perf_counter()
        est = orient(true_skel, stats, fam, cfg)
        row["t_orientation"] = time.perf_counter() - t0
        row["orientation_shd"] = shd_cpdag(truth, est).distance
    if "full" in stages:
        t0 = time.perf_counter()
        est = orient(skel, stats, fam, cfg)
        row["t_full"] = time.perf_counter() - t0 + row["t_skeleton"]
        row["full_shd"] = shd_cpdag(truth, est).distance
    rnd = synth.random_orientation(true_skel, g.n, rand_rng)
    row["random_shd"] = shd_cpdag(truth, i_cpdag(rnd, fam)).distance
    return row


def _run_star(args):
    return run_point(*args)


def run_benchmark(spec: BenchmarkSpec, threads: int = 1) -> list[dict]:
    """One row per grid point and seed, in grid order regardless of ``threads``."""
    jobs = [(pt, spec.alpha, tuple(spec.stages)) for pt in spec.points()]
    if threads <= 1 or len(jobs) == 1:
        return [_run_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_star, jobs))


COLUMNS = ("p", "n", "environments", "targets_per", "kind", "obs_fraction", "aggregation",
           "config", "seed") + METRICS


def write_rows(path, rows: Sequence[dict], timings: bool = False) -> None:
    """Tidy CSV; timing columns are opt-in so that reruns are byte-identical by default."""
    cols = COLUMNS + (TIMINGS if timings else ())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def median_by(rows: Sequence[dict], metric: str, *keys: str) -> dict:
    groups: dict = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(float(r[metric]))
    return {k: float(np.median(v)) for k, v in groups.items()}


def spec_from_dict(doc: dict) -> BenchmarkSpec:
    known = {f for f in BenchmarkSpec.__dataclass_fields__}
    extra = set(doc) - known
    if extra:
        raise ValueError(f"unknown benchmark fields: {sorted(extra)}")
    return BenchmarkSpec(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in doc.items()})


def spec_to_dict(spec: BenchmarkSpec) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()}
