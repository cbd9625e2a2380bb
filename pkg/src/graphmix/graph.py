"""Graph container, adjacency normalization and Homophily Relabel.

The normalized adjacency is row-stochastic, ``D^-1 (A + I)`` by default, so
multiplying it into a feature matrix replaces each node's row by a convex
combination of its neighbors' rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import IsolatedNode, InvalidGraph

UNLABELED = -1


def canonical_edges(edges, num_nodes=None):
    """Return an ``(M, 2)`` array of undirected edges with ``u < v``, sorted and deduplicated.

    Self-pairs are dropped; self-loops are a normalization choice, not data.
    """
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if num_nodes is not None and e.size and (e.min() < 0 or e.max() >= num_nodes):
        raise InvalidGraph("edge endpoint out of range")
    e = e[e[:, 0] != e[:, 1]]
    e = np.sort(e, axis=1)
    if len(e) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(e, axis=0)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable attributed graph with node labels and split masks.

    Labels use ``UNLABELED`` (-1) for nodes without a class. Unlabeled nodes
    may not appear in any mask.
    """

    features: np.ndarray
    edges: np.ndarray
    labels: np.ndarray
    num_classes: int
    train_mask: np.ndarray = None
    val_mask: np.ndarray = None
    test_mask: np.ndarray = None
    name: str = "graph"

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise InvalidGraph("features must be a 2-D matrix")
        if not np.all(np.isfinite(x)):
            raise InvalidGraph("features contain non-finite values")
        n = x.shape[0]
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != n:
            raise InvalidGraph(f"expected {n} labels, got {labels.shape[0]}")
        if np.any((labels < UNLABELED) | (labels >= self.num_classes)):
            raise InvalidGraph(f"labels must lie in [0, {self.num_classes}) or be unlabeled")
        edges = canonical_edges(self.edges, n)

        masks = {}
        for key in ("train_mask", "val_mask", "test_mask"):
            m = getattr(self, key)
            m = np.zeros(n, dtype=bool) if m is None else np.asarray(m, dtype=bool).reshape(-1)
            if m.shape[0] != n:
                raise InvalidGraph(f"{key} has length {m.shape[0]}, expected {n}")
            if np.any(labels[m] == UNLABELED):
                raise InvalidGraph(f"{key} contains unlabeled nodes")
            m = m.copy()
            m.setflags(write=False)
            masks[key] = m
        overlap = (masks["train_mask"].astype(int) + masks["val_mask"] + masks["test_mask"]) > 1
        if np.any(overlap):
            raise InvalidGraph("train/val/test masks overlap")

        for arr in (x, labels, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "edges", edges)
        for key, m in masks.items():
            object.__setattr__(self, key, m)

    @property
    def num_nodes(self):
        return self.features.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]

    def one_hot(self, mask=None):
        """One-hot label matrix; rows of unlabeled (or unmasked) nodes are zero."""
        y = np.zeros((self.num_nodes, self.num_classes))
        keep = self.labels >= 0
        if mask is not None:
            keep &= mask
        idx = np.flatnonzero(keep)
        y[idx, self.labels[idx]] = 1.0
        return y

    def with_masks(self, train, val, test):
        return Graph(self.features, self.edges, self.labels, self.num_classes,
                     train, val, test, self.name)

    def with_labels(self, labels):
        return Graph(self.features, self.edges, labels, self.num_classes,
                     self.train_mask, self.val_mask, self.test_mask, self.name)

    def with_edges(self, edges):
        return Graph(self.features, edges, self.labels, self.num_classes,
                     self.train_mask, self.val_mask, self.test_mask, self.name)

    def permute(self, perm):
        """Relabel node ``i`` as ``perm[i]``; returns the permuted graph."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return Graph(self.features[inv], perm[self.edges], self.labels[inv], self.num_classes,
                     self.train_mask[inv], self.val_mask[inv], self.test_mask[inv], self.name)

    def binary_adjacency(self):
        """Symmetric 0/1 adjacency as CSR, no self-loops."""
        n = self.num_nodes
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(u))
        a = sp.coo_matrix((data, (np.r_[u, v], np.r_[v, u])), shape=(n, n))
        return a.tocsr()

    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.num_nodes)


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """``base ** power`` where ``base`` is the normalized (power-1) adjacency.

    The explicit power is materialized lazily by :attr:`matrix`; :meth:`apply`
    multiplies by repeated sparse products so high powers on large graphs
    never need to be formed.
    """

    base: sp.csr_matrix
    self_loops: bool = True
    power: int = 1
    normalization: str = "row"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def num_nodes(self):
        return self.base.shape[0]

    @property
    def matrix(self):
        m = self._cache.get("matrix")
        if m is None:
            m = self.base.copy()
            for _ in range(self.power - 1):
                m = (m @ self.base).tocsr()
            m.sort_indices()
            self._cache["matrix"] = m
        return m

    def apply(self, x):
        """Return ``matrix @ x`` via ``power`` sparse multiplications."""
        out = x
        for _ in range(self.power):
            out = self.base @ out
        return out

    def apply_transpose(self, g):
        out = g
        bt = self._transposed_base()
        for _ in range(self.power):
            out = bt @ out
        return out

    def _transposed_base(self):
        bt = self._cache.get("base_t")
        if bt is None:
            bt = self.base.T.tocsr()
            self._cache["base_t"] = bt
        return bt

    def row(self, i):
        """Dense row ``i`` of the k-th power, computed with vector-matrix products only."""
        r = np.zeros(self.num_nodes)
        r[i] = 1.0
        bt = self._transposed_base()
        for _ in range(self.power):
            r = bt @ r
        return r

    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def is_identity(self):
        b = self.base
        return b.nnz == self.num_nodes and np.all(b.diagonal() == 1.0)


def normalize_adjacency(graph, self_loops=True, normalization="row"):
    """Build ``D^-1 A`` (or ``D^-1/2 A D^-1/2``), with ``A + I`` when ``self_loops``.

    Raises:
        IsolatedNode: ``self_loops`` is off and some node has no neighbor.
    """
    a = graph.binary_adjacency()
    n = graph.num_nodes
    if self_loops:
        a = (a + sp.identity(n, format="csr")).tocsr()
    deg = np.asarray(a.sum(axis=1)).ravel()
    if not self_loops and np.any(deg == 0):
        raise IsolatedNode(int(np.flatnonzero(deg == 0)[0]))
    if normalization == "row":
        m = sp.diags(1.0 / deg) @ a
    elif normalization == "sym":
        d = 1.0 / np.sqrt(deg)
        m = sp.diags(d) @ a @ sp.diags(d)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    m = m.tocsr()
    m.sort_indices()
    return NormalizedAdjacency(m, self_loops=self_loops, power=1, normalization=normalization)


def adjacency_power(adj, k):
    """Return the k-th power of the power-1 adjacency underlying ``adj``."""
    if k < 1:
        raise ValueError("power must be >= 1")
    if k == adj.power:
        return adj
    return NormalizedAdjacency(adj.base, adj.self_loops, int(k), adj.normalization)


@dataclass(frozen=True, eq=False)
class SoftLabelMatrix:
    matrix: np.ndarray
    coverage_mask: np.ndarray

    @property
    def num_covered(self):
        return int(self.coverage_mask.sum())


def homophily_relabel(graph, adj, power=1):
    """Soft labels from the train-labeled nodes within ``power`` hops (self included).

    Contributors are weighted by the node's row of ``A^power`` and the weights
    are renormalized over train nodes only, so each covered row is a
    distribution. At ``power=1`` this is the plain mean over labeled
    neighbors. Nodes without any labeled contributor stay all-zero and
    uncovered. Only ``graph.train_mask`` labels are read.
    """
    if not adj.self_loops:
        raise ValueError("homophily_relabel expects an adjacency built with self-loops")
    if power < 1:
        raise ValueError("relabel power must be >= 1")
    counts = adjacency_power(adj, power).apply(graph.one_hot(graph.train_mask))
    total = counts.sum(axis=1)
    covered = total > 0
    soft = np.zeros_like(counts)
    soft[covered] = counts[covered] / total[covered, None]
    soft.setflags(write=False)
    covered.setflags(write=False)
    return SoftLabelMatrix(soft, covered)
