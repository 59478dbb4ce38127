"""Learn the protein signalling network from the pinned flow-cytometry fixtures.

The fixtures in ``tests/data/sachs`` are produced by
``tools/sachs_preprocess.py``: one observational data set and five
one-node interventional data sets, 5846 rows over 11 proteins.

    python demos/sachs_protein_network.py
"""

import itertools
from pathlib import Path

from ipolytree import OrientationConfig, learn, shd_cpdag
from ipolytree.io import format_edges, read_edges, read_manifest

DATA = Path(__file__).resolve().parent.parent / "tests" / "data" / "sachs"

manifest = read_manifest(DATA / "manifest.json")
data = manifest.load()
consensus, _ = read_edges(DATA / "consensus.edges", manifest.vertices)
for i, (t, x) in enumerate(zip(manifest.targets, data)):
    print(f"env {i}: n={x.shape[0]:4d} targets={[manifest.vertices[v] for v in t]}")

res = learn(data, manifest.family, "mean", OrientationConfig("p2", "irc", "simple"))
print("\nestimate (mean aggregation, p2-irc-simple):")
print(format_edges(res.graph, manifest.vertices))
print("SHD to the consensus network:", shd_cpdag(consensus, res.graph).distance)

print("\nSHD for every aggregation and orientation setting:")
for agg in ("fisher", "mean", "median", "pooled", "obs"):
    cells = []
    for cfg in itertools.product(("p1", "p2"), ("bic", "irc"), ("simple", "refined")):
        out = learn(data, manifest.family, agg, OrientationConfig(*cfg))
        cells.append(f"{'-'.join(cfg)}={shd_cpdag(consensus, out.graph).distance}")
    print(f"  {agg:7s} " + " ".join(cells))
