#!/usr/bin/env python3
"""Convert the public Planetoid files (ind.<name>.*) into a graph bundle.

Usage:
    python scripts/convert_planetoid.py RAW_DIR NAME OUT_DIR

RAW_DIR holds ind.NAME.{x,y,tx,ty,allx,ally,graph,test.index} as distributed
with the original Planetoid code. The standard split (first |y| nodes train,
next 500 val, test.index test) is written as splits.json["public"].
Nothing is downloaded.
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from graphmix.data import UNLABELED, load_bundle, save_bundle
from graphmix.graph import Graph

EXPECTED = {
    "cora": (2708, 7, 1433),
    "citeseer": (3327, 6, 3703),
    "pubmed": (19717, 3, 500),
}


def _load(raw, name, part):
    with open(raw / f"ind.{name}.{part}", "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def convert(raw, name):
    raw = Path(raw)
    x, y, tx, ty, allx, ally, graph = (_load(raw, name, p)
                                       for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_idx)

    tx, ty = _dense(tx), _dense(ty)
    span = test_sorted[-1] - test_sorted[0] + 1
    if span != len(test_sorted):
        # citeseer has isolated test ids without features; pad them with zero rows
        full_x = np.zeros((span, tx.shape[1]))
        full_y = np.zeros((span, ty.shape[1]))
        full_x[test_sorted - test_sorted[0]] = tx
        full_y[test_sorted - test_sorted[0]] = ty
        tx, ty = full_x, full_y

    feats = np.vstack([_dense(allx), tx])
    onehot = np.vstack([_dense(ally), ty])
    feats[test_idx] = feats[test_sorted]
    onehot[test_idx] = onehot[test_sorted]

    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), UNLABELED)
    n = feats.shape[0]
    edges = [(int(u), int(v)) for u, nbrs in graph.items() for v in nbrs if u < n and v < n]

    n_train = _dense(y).shape[0]
    train = np.zeros(n, bool)
    train[:n_train] = True
    val = np.zeros(n, bool)
    val[n_train:n_train + 500] = True
    test = np.zeros(n, bool)
    test[test_idx] = True
    # only matters for toy inputs; in the public files the val range precedes every test id
    val &= ~test
    # nodes with no label row cannot sit in a mask
    for m in (train, val, test):
        m &= labels != UNLABELED
    return Graph(feats, edges, labels, onehot.shape[1], train, val, test, name=name)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw_dir")
    ap.add_argument("name")
    ap.add_argument("out_dir")
    args = ap.parse_args(argv)

    g = convert(args.raw_dir, args.name)
    save_bundle(g, args.out_dir, split="public")
    back = load_bundle(args.out_dir)
    counts = (back.num_nodes, back.num_classes, back.feature_dim)
    print(f"{args.name}: N={counts[0]} C={counts[1]} d={counts[2]} "
          f"undirected edges={back.num_edges} train/val/test="
          f"{int(back.train_mask.sum())}/{int(back.val_mask.sum())}/{int(back.test_mask.sum())}")
    want = EXPECTED.get(args.name)
    if want and counts != want:
        print(f"counts differ from the public distribution {want}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
