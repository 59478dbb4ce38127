"""Small simulation grid: skeleton and orientation error against sample size.

Runs in well under a minute.  The same grid can be produced from the shell:

    ipolytree benchmark --p 50 --n 300,1000,3000 --environments 6 --targets-per 2 \
        --aggregation fisher,mean,median --configs p2-irc-simple,p1-bic-simple --seeds 0-9
"""

import sys

from ipolytree.benchmark import BenchmarkSpec, median_by, run_benchmark

threads = int(sys.argv[1]) if len(sys.argv) > 1 else 1
spec = BenchmarkSpec(
    p=(50,),
    n=(300, 1000, 3000),
    environments=(6,),
    targets_per=(2,),
    aggregation=("fisher", "mean", "median"),
    configs=("p2-irc-simple", "p1-bic-simple"),
    seeds=tuple(range(10)),
)
rows = run_benchmark(spec, threads)

skel = median_by(rows, "skeleton_shd", "aggregation", "n")
print("median skeleton SHD (rows: aggregation, columns: n)")
print(f"{'':8s}" + "".join(f"{n:>8d}" for n in spec.n))
for agg in spec.aggregation:
    print(f"{agg:8s}" + "".join(f"{skel[(agg, n)]:8.1f}" for n in spec.n))

orient = median_by([r for r in rows if r["aggregation"] == "mean"], "orientation_shd", "config", "n")
rand = median_by(rows, "random_shd", "n")
print("\nmedian orientation SHD from the true skeleton")
print(f"{'':15s}" + "".join(f"{n:>8d}" for n in spec.n))
for cfg in spec.configs:
    print(f"{cfg:15s}" + "".join(f"{orient[(cfg, n)]:8.1f}" for n in spec.n))
print(f"{'random':15s}" + "".join(f"{rand[(n,)]:8.1f}" for n in spec.n))
