"""Split the Sachs flow-cytometry table into pinned per-environment fixtures.

The source is ``cyto_full_data.csv`` (7466 rows, 11 proteins) as shipped in
the ``cdt`` 0.6.0 wheel, where the nine reagent blocks of the original study
are stacked in a fixed order.  The split follows the common convention of
one observational and five one-node interventional data sets:

=====  =====  ==================  =============
block  rows   reagent             role
=====  =====  ==================  =============
0      853    cd3cd28             observational
1      902    cd3cd28 + icam2     observational
2      911    akt inhibitor       target pakts473
3      723    G0076               target PKC
4      810    psitect             target PIP2
5      799    U0126               target pmek
6      848    LY294002            target PIP3
7      913    PMA                 dropped
8      707    b2cAMP              dropped
=====  =====  ==================  =============

Usage::

    python tools/sachs_preprocess.py path/to/cyto_full_data.csv tests/data/sachs
    python tools/sachs_preprocess.py path/to/cdt-0.6.0-py3-none-any.whl tests/data/sachs

``--transform log`` writes ``log`` of the measurements instead of raw values.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import zipfile
from pathlib import Path

import numpy as np

SOURCE_SHA256 = "fc331dcd0bc1d8765986b88cd1d23dd5a3f52e4ffc299fdf96de9d522ddf01aa"
WHEEL_MEMBER = "cdt/data/resources/cyto_full_data.csv"
BLOCKS = [853, 902, 911, 723, 810, 799, 848, 913, 707]
# environment -> blocks and targets
SPLIT = [
    ([0, 1], []),
    ([2], ["pakts473"]),
    ([3], ["PKC"]),
    ([4], ["PIP2"]),
    ([5], ["pmek"]),
    ([6], ["PIP3"]),
]
RENAME = {"p44/42": "p4442"}

CONSENSUS = """\
# vertices: praf pmek plcg PIP2 PIP3 p4442 pakts473 PKA PKC P38 pjnk
praf -> pmek
pmek -> p4442
plcg -> PIP2
plcg -> PIP3
PIP2 -> PKC
PIP3 -> PIP2
PIP3 -> pakts473
p4442 -> pakts473
PKA -> praf
PKA -> pmek
PKA -> p4442
PKA -> pakts473
PKA -> P38
pjnk -> PKC
PKA -- pjnk
PKA -- PKC
"""

REPORTED_ESTIMATE = """\
# vertices: praf pmek plcg PIP2 PIP3 p4442 pakts473 PKA PKC P38 pjnk
praf -> pmek
PIP2 -> pmek
PIP2 -> plcg
PIP3 -> PIP2
p4442 -> pakts473
pakts473 -> PKA
PKA -> pmek
P38 -> PKC
P38 -- pjnk
"""


def read_source(path: Path) -> bytes:
    if path.suffix == ".whl":
        with zipfile.ZipFile(path) as zf:
            raw = zf.read(WHEEL_MEMBER)
    else:
        raw = path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != SOURCE_SHA256:
        raise SystemExit(f"unexpected source checksum {digest}")
    return raw


def split(raw: bytes, transform: str = "raw"):
    text = raw.decode()
    header = text.splitlines()[0].split(",")
    x = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
    if x.shape[0] != sum(BLOCKS):
        raise SystemExit(f"expected {sum(BLOCKS)} rows, found {x.shape[0]}")
    if transform == "log":
        x = np.log(x)
    names = [RENAME.get(h, h) for h in header]
    starts = np.concatenate([[0], np.cumsum(BLOCKS)])
    envs = []
    for blocks, targets in SPLIT:
        rows = np.concatenate([x[starts[b]:starts[b + 1]] for b in blocks])
        envs.append((rows, targets))
    return names, envs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("source", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--transform", choices=["raw", "log"], default="raw")
    args = ap.parse_args(argv)

    names, envs = split(read_source(args.source), args.transform)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (rows, targets) in enumerate(envs):
        fname = f"env_{i}.csv"
        np.savetxt(out / fname, rows, delimiter=",", header=",".join(names), comments="", fmt="%.10g")
        entries.append({"file": fname, "targets": targets, "n": int(rows.shape[0])})
    manifest = {"vertices": names, "environments": entries, "transform": args.transform,
                "source_sha256": SOURCE_SHA256}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (out / "consensus.edges").write_text(CONSENSUS)
    (out / "reported_estimate.edges").write_text(REPORTED_ESTIMATE)
    files = sorted(p for p in out.iterdir() if p.name != "SHA256SUMS")
    sums = "".join(f"{hashlib.sha256(p.read_bytes()).hexdigest()}  {p.name}\n" for p in files)
    (out / "SHA256SUMS").write_text(sums)
    print(f"wrote {len(envs)} environments, {sum(r.shape[0] for r, _ in envs)} rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
