"""Plain-text graph files, dataset manifests and per-environment CSV."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .graphs import GraphError, InterventionFamily, PartiallyDirectedGraph


class InputError(ValueError):
    """Malformed or inconsistent user input."""


# --------------------------------------------------------------------------
# edge lists

def format_edges(g: PartiallyDirectedGraph, names: Sequence[str] | None = None) -> str:
    """One edge per line (``a -> b`` or ``a -- b``) after a ``# vertices:`` header."""
    names = list(names) if names is not None else [str(i) for i in range(g.n)]
    if len(names) != g.n:
        raise InputError("need one name per vertex")
    lines = ["# vertices: " + " ".join(names)]
    lines += [f"{names[u]} -> {names[v]}" for u, v in sorted(g.directed)]
    lines += [f"{names[u]} -- {names[v]}" for u, v in sorted(g.undirected)]
    return "\n".join(lines) + "\n"


def parse_edges(text: str, names: Sequence[str] | None = None) -> tuple[PartiallyDirectedGraph, list[str]]:
    """Inverse of :func:`format_edges`.

    Without a header or explicit ``names``, integer labels define ``0..max``
    and any other labels are numbered in order of first appearance.
    """
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("vertices:"):
                header = body.split(":", 1)[1].split()
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] not in ("->", "<-", "--"):
            raise InputError(f"line {lineno}: expected 'a -> b' or 'a -- b', got {raw!r}")
        rows.append((parts[0], parts[1], parts[2]))
    if names is None:
        names = header
    if names is None:
        labels = list(dict.fromkeys(x for a, _, b in rows for x in (a, b)))
        if labels and all(x.isdigit() for x in labels):
            names = [str(i) for i in range(max(int(x) for x in labels) + 1)]
        else:
            names = labels
    names = list(names)
    index = {name: i for i, name in enumerate(names)}
    if len(index) != len(names):
        raise InputError("duplicate vertex names")
    directed, undirected = [], []
    for a, op, b in rows:
        if a not in index or b not in index:
            raise InputError(f"unknown vertex in edge {a} {op} {b}")
        u, v = index[a], index[b]
        if op == "->":
            directed.append((u, v))
        elif op == "<-":
            directed.append((v, u))
        else:
            undirected.append((u, v))
    try:
        g = PartiallyDirectedGraph(max(len(names), 1), frozenset(directed), frozenset(undirected))
    except GraphError as exc:
        raise InputError(str(exc)) from exc
    return g, names


def read_edges(path, names=None) -> tuple[PartiallyDirectedGraph, list[str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return parse_edges(text, names)


def write_edges(path, g: PartiallyDirectedGraph, names=None) -> None:
    Path(path).write_text(format_edges(g, names))


def to_dot(g: PartiallyDirectedGraph, names: Sequence[str] | None = None) -> str:
    names = list(names) if names is not None else [str(i) for i in range(g.n)]
    lines = ["digraph G {"]
    lines += [f'  "{n}";' for n in names]
    lines += [f'  "{names[u]}" -> "{names[v]}";' for u, v in sorted(g.directed)]
    lines += [f'  "{names[u]}" -> "{names[v]}" [dir=none];' for u, v in sorted(g.undirected)]
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# data

def write_csv(path, x: np.ndarray, names: Sequence[str]) -> None:
    np.savetxt(path, x, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


def read_csv(path) -> tuple[np.ndarray, list[str]]:
    try:
        with open(path) as fh:
            header = fh.readline().strip()
            x = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: malformed CSV ({exc})") from exc
    names = [h.strip() for h in header.split(",")]
    if x.size and x.shape[1] != len(names):
        raise InputError(f"{path}: header has {len(names)} columns, data has {x.shape[1]}")
    if not np.isfinite(x).all():
        raise InputError(f"{path}: non-finite values")
    return x, names


@dataclass
class DatasetManifest:
    """Environments (data file, targets, declared size) and the vertex names."""

    vertices: list[str]
    files: list[Path]
    targets: list[list[int]]
    sizes: list[int | None]

    @property
    def family(self) -> InterventionFamily:
        return InterventionFamily(self.targets)

    def to_json(self, base: Path | None = None) -> dict:
        envs = []
        for f, t, n in zip(self.files, self.targets, self.sizes):
            path = os.path.relpath(f, base) if base is not None else str(f)
            envs.append({"file": path, "targets": [self.vertices[i] for i in t], "n": n})
        return {"vertices": self.vertices, "environments": envs}

    def load(self) -> list[np.ndarray]:
        data = []
        for f, n in zip(self.files, self.sizes):
            x, names = read_csv(f)
            if names != self.vertices:
                raise InputError(f"{f}: columns {names} do not match the manifest vertices")
            if n is not None and x.shape[0] != n:
                raise InputError(f"{f}: declared {n} rows, found {x.shape[0]}")
            if x.shape[0] < 2:
                raise InputError(f"{f}: need at least two rows")
            data.append(x)
        return data


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from exc
    try:
        vertices = [str(v) for v in doc["vertices"]]
        envs = doc["environments"]
    except (KeyError, TypeError) as exc:
        raise InputError("manifest needs 'vertices' and 'environments'") from exc
    index = {v: i for i, v in enumerate(vertices)}
    files, targets, sizes = [], [], []
    for env in envs:
        try:
            files.append(path.parent / env["file"])
        except (KeyError, TypeError) as exc:
            raise InputError("every environment needs a 'file'") from exc
        tset = []
        for t in env.get("targets", []):
            if isinstance(t, int) and 0 <= t < len(vertices):
                tset.append(t)
            elif str(t) in index:
                tset.append(index[str(t)])
            else:
                raise InputError(f"unknown target {t!r}")
        targets.append(sorted(set(tset)))
        sizes.append(env.get("n"))
    n_obs = sum(1 for t in targets if not t)
    if n_obs != 1:
        raise InputError(f"exactly one environment must have no targets, found {n_obs}")
    return DatasetManifest(vertices, files, targets, sizes)


def write_dataset(out_dir, data: Sequence[np.ndarray], fam: InterventionFamily,
                  names: Sequence[str] | None = None) -> Path:
    """Write one CSV per environment plus ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = data[0].shape[1]
    names = list(names) if names is not None else [f"X{i}" for i in range(p)]
    files = []
    for i, x in enumerate(data):
        f = out / f"env_{i:03d}.csv"
        write_csv(f, x, names)
        files.append(f)
    manifest = DatasetManifest(names, files, [sorted(t) for t in fam], [int(x.shape[0]) for x in data])
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest.to_json(out), indent=2) + "\n")
    return mpath
