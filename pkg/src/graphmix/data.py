"""Graph bundles on disk, train/val/test splits, and the synthetic example graphs.

A bundle is a directory::

    features.tsv   N rows of d tab-separated reals
    labels.tsv     N rows: integer class or "-" for unlabeled
    edges.tsv      M rows "u<TAB>v" (undirected; duplicates collapse)
    meta.json      {"dataset", "num_nodes", "num_classes", "feature_dim"}
    splits.json    optional {"<name>": {"train": [...], "val": [...], "test": [...]}}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    ClassOutOfRange,
    IndexOutOfRange,
    InfeasibleSplit,
    MissingFile,
    ParseError,
)
from .graph import UNLABELED, Graph

REQUIRED_FILES = ("features.tsv", "labels.tsv", "edges.tsv", "meta.json")
SPLIT_KEYS = ("train", "val", "test")


def _read_lines(path):
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _format_real(v):
    return repr(float(v))


def load_bundle(path, split="public", normalize_features=False):
    """Read a bundle directory into a :class:`Graph`.

    Masks come from ``splits.json[split]`` when present. With
    ``normalize_features`` each feature row is scaled to sum to 1
    (rows summing to 0 are left alone).
    """
    root = Path(path)
    for name in REQUIRED_FILES:
        if not (root / name).is_file():
            raise MissingFile(f"missing {name}", root / name)

    meta_path = root / "meta.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        n = int(meta["num_nodes"])
        c = int(meta["num_classes"])
        d = int(meta["feature_dim"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad meta.json ({exc})", meta_path) from exc

    fpath = root / "features.tsv"
    rows = _read_lines(fpath)
    if len(rows) != n:
        raise ParseError(f"expected {n} feature rows, found {len(rows)}", fpath)
    X = np.empty((n, d))
    for i, line in enumerate(rows):
        parts = line.split("\t") if d else []
        if len(parts) != d:
            raise ParseError(f"expected {d} columns, found {len(parts)}", fpath, i + 1)
        try:
            X[i] = np.array(parts, dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"non-numeric feature ({exc})", fpath, i + 1) from exc
        if not np.all(np.isfinite(X[i])):
            raise ParseError("non-finite feature", fpath, i + 1)

    lpath = root / "labels.tsv"
    rows = _read_lines(lpath)
    if len(rows) != n:
        raise ParseError(f"expected {n} label rows, found {len(rows)}", lpath)
    labels = np.empty(n, dtype=np.int64)
    for i, line in enumerate(rows):
        tok = line.strip()
        if tok == "-":
            labels[i] = UNLABELED
            continue
        try:
            labels[i] = int(tok)
        except ValueError as exc:
            raise ParseError(f"bad label {tok!r}", lpath, i + 1) from exc
        if not 0 <= labels[i] < c:
            raise ClassOutOfRange(f"class {labels[i]} outside [0, {c})", lpath, i + 1)

    epath = root / "edges.tsv"
    rows = _read_lines(epath)
    edges = np.empty((len(rows), 2), dtype=np.int64)
    for i, line in enumerate(rows):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("edge rows need two node indices", epath, i + 1)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(f"bad edge {line!r}", epath, i + 1) from exc
        if not (0 <= u < n and 0 <= v < n):
            raise IndexOutOfRange(f"edge ({u}, {v}) outside [0, {n})", epath, i + 1)
        edges[i] = (u, v)

    masks = [None, None, None]
    spath = root / "splits.json"
    if spath.is_file():
        try:
            splits = json.loads(spath.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad splits.json ({exc})", spath) from exc
        if split in splits:
            for j, key in enumerate(SPLIT_KEYS):
                idx = np.asarray(splits[split].get(key, []), dtype=np.int64)
                if idx.size and (idx.min() < 0 or idx.max() >= n):
                    raise IndexOutOfRange(f"split {split}/{key} index outside [0, {n})", spath)
                m = np.zeros(n, dtype=bool)
                m[idx] = True
                masks[j] = m

    if normalize_features:
        s = X.sum(axis=1, keepdims=True)
        X = np.divide(X, s, out=X.copy(), where=s != 0)
    return Graph(X, edges, labels, c, *masks, name=str(meta.get("dataset", root.name)))


def save_bundle(graph, path, split="public"):
    """Write ``graph`` in canonical form; masks go to ``splits.json[split]`` if any is set."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "dataset": graph.name,
        "num_nodes": graph.num_nodes,
        "num_classes": graph.num_classes,
        "feature_dim": graph.feature_dim,
    }
    _write(root / "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _write(root / "features.tsv", "".join(
        "\t".join(_format_real(v) for v in row) + "\n" for row in graph.features))
    _write(root / "labels.tsv", "".join(
        ("-" if y == UNLABELED else str(int(y))) + "\n" for y in graph.labels))
    _write(root / "edges.tsv", "".join(f"{u}\t{v}\n" for u, v in graph.edges))
    if graph.train_mask.any() or graph.val_mask.any() or graph.test_mask.any():
        spath = root / "splits.json"
        splits = json.loads(spath.read_text(encoding="utf-8")) if spath.is_file() else {}
        splits[split] = {k: np.flatnonzero(m).tolist() for k, m in
                         zip(SPLIT_KEYS, (graph.train_mask, graph.val_mask, graph.test_mask))}
        _write(spath, json.dumps(splits, indent=2, sort_keys=True) + "\n")
    return root


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


@dataclass(frozen=True)
class SplitSpec:
    train_ratio: float
    val_ratio: float
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_ratio < 1 or self.val_ratio < 0:
            raise ValueError("train_ratio must lie in (0, 1) and val_ratio >= 0")
        if self.train_ratio + self.val_ratio >= 1:
            raise ValueError("train_ratio + val_ratio must be < 1")

    @classmethod
    def from_train_ratio(cls, ratio, seed=0, stratified=True):
        """Train on ``ratio``; validation and test share the rest equally."""
        return cls(ratio, (1.0 - ratio) / 2.0, seed, stratified)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def make_split(graph, spec):
    """Assign labeled nodes to train/val/test; deterministic for a fixed seed.

    Stratified splits take ``round(ratio * class_size)`` nodes of every class,
    so per-class counts are within one node of the exact proportion.
    """
    rng = np.random.default_rng(spec.seed)
    n = graph.num_nodes
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    labeled = np.flatnonzero(graph.labels != UNLABELED)
    if spec.stratified:
        groups = [(c, labeled[graph.labels[labeled] == c]) for c in range(graph.num_classes)]
    else:
        groups = [(None, labeled)]
    for c, idx in groups:
        if len(idx) == 0:
            continue
        idx = rng.permutation(idx)
        n_train = _round_half_up(spec.train_ratio * len(idx))
        n_val = _round_half_up(spec.val_ratio * len(idx))
        if spec.stratified and n_train == 0:
            raise InfeasibleSplit(
                f"class {c} has {len(idx)} nodes; train ratio {spec.train_ratio} leaves none")
        n_val = min(n_val, len(idx) - n_train)
        train[idx[:n_train]] = True
        val[idx[n_train:n_train + n_val]] = True
        test[idx[n_train + n_val:]] = True
    return graph.with_masks(train, val, test)


# -- synthetic graphs --------------------------------------------------------

SYNTHETIC_KINDS = ("three_node_example", "two_clusters", "citation_like")


def synthetic_graph(kind, seed=0):
    """Build one of the bundled synthetic graphs.

    ``three_node_example``: two train nodes of different classes joined
    through an unlabeled target node. ``two_clusters``: 200 nodes with 2-D
    Gaussian features, two classes, mostly intra-class edges, stratified
    60/20/20 split. ``citation_like``: a homophilous bag-of-words graph used
    as an offline stand-in for citation benchmarks.
    """
    if kind == "three_node_example":
        X = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        labels = np.array([0, 1, UNLABELED])
        train = np.array([True, True, False])
        return Graph(X, [(0, 2), (1, 2)], labels, 2, train, name="three_node_example")
    if kind == "two_clusters":
        return _two_clusters(seed)
    if kind == "citation_like":
        return _citation_like(seed)
    raise ValueError(f"unknown synthetic graph {kind!r}; choose from {SYNTHETIC_KINDS}")


def _two_clusters(seed, n=200, degree=4, noise_edges=0.05):
    rng = np.random.default_rng(seed)
    labels = np.repeat([0, 1], n // 2)
    centers = np.array([[-1.0, 0.0], [1.0, 0.0]])
    X = centers[labels] + rng.normal(scale=0.9, size=(n, 2))
    edges = []
    for i in range(n):
        same = np.flatnonzero(labels == labels[i])
        for j in rng.choice(same, size=degree // 2, replace=False):
            edges.append((i, int(j)))
    n_noise = int(noise_edges * len(edges))
    for _ in range(n_noise):
        i = int(rng.integers(n // 2))
        j = int(rng.integers(n // 2, n))
        edges.append((i, j))
    g = Graph(X, edges, labels, 2, name="two_clusters")
    return make_split(g, SplitSpec(0.6, 0.2, seed=seed))


def _citation_like(seed, n=1200, classes=6, dim=300, words=12, degree=4, homophily=0.7):
    rng = np.random.default_rng(seed)
    labels = np.sort(rng.integers(classes, size=n))
    topic = rng.dirichlet(np.full(dim, 0.1), size=classes)
    background = np.full(dim, 1.0 / dim)
    X = np.zeros((n, dim))
    for i in range(n):
        p = 0.35 * topic[labels[i]] + 0.65 * background
        X[i, rng.choice(dim, size=words, replace=False, p=p)] = 1.0
    by_class = [np.flatnonzero(labels == c) for c in range(classes)]
    edges = []
    for i in range(n):
        for _ in range(degree // 2):
            if rng.random() < homophily:
                j = int(rng.choice(by_class[labels[i]]))
            else:
                j = int(rng.integers(n))
            edges.append((i, j))
    g = Graph(X, edges, labels, classes, name="citation_like")
    return make_split(g, SplitSpec(0.6, 0.2, seed=seed))
