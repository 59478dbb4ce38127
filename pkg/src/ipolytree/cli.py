"""Command line entry point: ``learn``, ``simulate``, ``benchmark`` and ``shd``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, synth
from .benchmark import BenchmarkSpec, median_by, run_benchmark, spec_from_dict, spec_to_dict, write_rows
from .graphs import GraphError, Polytree, i_cpdag, shd_cpdag
from .io import InputError, read_edges, read_manifest, to_dot, write_dataset, write_edges
from .orientation import OrientationConfig, learn
from .stats import NumericalError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
THREADS_ENV = "IPOLYTREE_THREADS"

log = logging.getLogger("ipolytree")


def _default_threads() -> int:
    try:
        return max(int(os.environ.get(THREADS_ENV, "1")), 1)
    except ValueError:
        return 1


def _csv_list(kind):
    def parse(text: str):
        return [kind(x) for x in text.split(",") if x.strip()]
    return parse


def _seed_list(text: str) -> list[int]:
    """``"0-19"`` or ``"1,5,7"``."""
    out = []
    for chunk in text.split(","):
        if "-" in chunk.strip()[1:]:
            a, b = chunk.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif chunk.strip():
            out.append(int(chunk))
    return out


def _add_orientation_flags(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--procedure", choices=["p1", "p2"], default="p2")
    ap.add_argument("--pairwise", choices=["bic", "irc"], default="irc")
    ap.add_argument("--collider", choices=["simple", "refined"], default="simple")
    ap.add_argument("--alpha", type=float, default=0.05)


def _write_report(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")


def cmd_learn(args) -> int:
    manifest = read_manifest(args.manifest)
    data = manifest.load()
    cfg = OrientationConfig(args.procedure, args.pairwise, args.collider, args.alpha)
    result = learn(data, manifest.family, args.aggregation, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edges(out / "estimate.edges", result.graph, manifest.vertices)
    (out / "estimate.dot").write_text(to_dot(result.graph, manifest.vertices))
    report = dict(result.report)
    report.update({"version": __version__, "seed": args.seed, "manifest": str(args.manifest),
                   "vertices": manifest.vertices})
    if args.truth:
        truth, _ = read_edges(args.truth, manifest.vertices)
        res = shd_cpdag(truth, result.graph)
        report["shd"] = {"truth": str(args.truth), "distance": res.distance, "additions": res.additions,
                         "deletions": res.deletions, "reversals": res.reversals}
        print(f"shd to {args.truth}: {res.distance}")
    _write_report(out / "report.json", report)
    print(f"wrote {out / 'estimate.edges'} ({report['n_directed']} directed, "
          f"{report['n_undirected']} undirected)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    ss = np.random.SeedSequence(args.seed)
    g_ss, f_ss, p_ss, d_ss = ss.spawn(4)
    if args.graph == "polytree":
        g = synth.random_polytree(args.p, np.random.default_rng(g_ss))
    else:
        g = synth.random_dag(args.p, args.edges_per_node, args.graph, np.random.default_rng(g_ss))
    fam = synth.random_family(args.p, args.environments - 1, args.targets_per, np.random.default_rng(f_ss))
    params = synth.draw_params(g, fam, args.kind, np.random.default_rng(p_ss))
    sizes = synth.even_sizes(args.n, args.environments)
    data = synth.sample(params, sizes, np.random.default_rng(d_ss))
    out = Path(args.out_dir)
    names = [f"X{i}" for i in range(args.p)]
    mpath = write_dataset(out, data, fam, names)
    write_edges(out / "truth.edges", g.to_pdag(), names)
    if isinstance(g, Polytree):
        write_edges(out / "truth_cpdag.edges", i_cpdag(g, fam), names)
    _write_report(out / "simulate.json", {
        "version": __version__, "seed": args.seed, "p": args.p, "n": args.n,
        "environments": args.environments, "targets_per": args.targets_per,
        "kind": args.kind, "graph": args.graph, "sizes": sizes,
    })
    print(f"wrote {mpath}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    if args.spec:
        try:
            doc = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read benchmark spec: {exc}") from exc
    else:
        doc = {"p": args.p, "n": args.n, "environments": args.environments,
               "targets_per": args.targets_per, "kind": args.kind,
               "aggregation": args.aggregation, "configs": args.configs,
               "seeds": args.seeds if args.seeds is not None else [args.seed],
               "alpha": args.alpha}
        if args.obs_fraction:
            doc["obs_fraction"] = args.obs_fraction
    try:
        spec = spec_from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid benchmark spec: {exc}") from exc
    rows = run_benchmark(spec, args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "results.csv", rows)
    write_rows(out / "timings.csv", rows, timings=True)
    _write_report(out / "benchmark.json", {"version": __version__, "spec": spec_to_dict(spec),
                                           "threads": args.threads, "rows": len(rows)})
    med = median_by(rows, "full_shd", "p", "n", "aggregation", "config")
    for key, value in med.items():
        print("p={} n={} aggregation={} config={}: median full SHD {:.1f}".format(*key, value))
    return EXIT_OK


def cmd_shd(args) -> int:
    a, names_a = read_edges(args.a)
    b, names_b = read_edges(args.b)
    if sorted(names_a) != sorted(names_b):
        raise InputError("the two graphs have different vertex sets")
    if names_a != names_b:
        b, _ = read_edges(args.b, names_a)
    res = shd_cpdag(a, b)
    print(f"shd {res.distance}")
    print(f"additions {res.additions}")
    print(f"deletions {res.deletions}")
    print(f"reversals {res.reversals}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ipolytree", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    lp = sub.add_parser("learn", help="estimate the interventional CPDAG of a dataset")
    lp.add_argument("manifest")
    lp.add_argument("--aggregation", default="mean",
                    choices=["fisher", "mean", "median", "pooled", "obs"])
    _add_orientation_flags(lp)
    lp.add_argument("--truth", help="edge list to report the SHD against")
    lp.add_argument("--seed", type=int, default=0, help="recorded in the report")
    lp.add_argument("--threads", type=int, default=_default_threads())
    lp.add_argument("--out-dir", default="out")
    lp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("simulate", help="write a synthetic multi-environment dataset")
    sp.add_argument("--p", type=int, default=20)
    sp.add_argument("--n", type=int, default=2000, help="total samples over all environments")
    sp.add_argument("--environments", type=int, default=6, help="data sets, observational included")
    sp.add_argument("--targets-per", type=int, default=1)
    sp.add_argument("--kind", default="perfect", choices=[k.value for k in synth.InterventionKind])
    sp.add_argument("--graph", default="polytree", choices=["polytree", "erdos_renyi", "barabasi_albert"])
    sp.add_argument("--edges-per-node", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=_default_threads())
    sp.add_argument("--out-dir", default="sim")
    sp.set_defaults(func=cmd_simulate)

    bp = sub.add_parser("benchmark", help="run a simulation grid and write tidy CSV")
    bp.add_argument("--spec", help="JSON file with BenchmarkSpec fields; overrides the grid flags")
    bp.add_argument("--p", type=_csv_list(int), default=[50])
    bp.add_argument("--n", type=_csv_list(int), default=[1000])
    bp.add_argument("--environments", type=_csv_list(int), default=[6])
    bp.add_argument("--targets-per", type=_csv_list(int), default=[1])
    bp.add_argument("--kind", type=_csv_list(str), default=["perfect"])
    bp.add_argument("--aggregation", type=_csv_list(str), default=["mean"])
    bp.add_argument("--configs", type=_csv_list(str), default=None,
                    help="labels such as p2-irc-simple; defaults to the orientation flags")
    bp.add_argument("--obs-fraction", type=_csv_list(float), default=None)
    bp.add_argument("--seeds", type=_seed_list, default=None, help="e.g. 0-19")
    _add_orientation_flags(bp)
    bp.add_argument("--seed", type=int, default=0)
    bp.add_argument("--threads", type=int, default=_default_threads())
    bp.add_argument("--out-dir", default="bench")
    bp.set_defaults(func=cmd_benchmark)

    hp = sub.add_parser("shd", help="structural Hamming distance between two edge lists")
    hp.add_argument("a")
    hp.add_argument("b")
    hp.set_defaults(func=cmd_shd)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "configs", "") is None:
        args.configs = [f"{args.procedure}-{args.pairwise}-{args.collider}"]
    try:
        return args.func(args)
    except (InputError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
