"""Self-checking oracle suite: exact identities the implementation must satisfy.

Each check returns a :class:`CheckResult`; :func:`run_suite` runs all of them
against one graph. ``inject`` corrupts the adjacency on purpose so callers
can confirm that the suite notices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import synthetic_graph
from .graph import Graph, NormalizedAdjacency, homophily_relabel, normalize_adjacency
from .models import (
    ModelSpec,
    TrainedModel,
    _edges_key,
    init_params,
    layerwise_mixup_residual,
    mixup_form_predict,
    predict,
    run_layout,
    train_layout,
    training_targets,
)
from .numerics import (
    Tape,
    backward,
    central_difference,
    relative_error,
    soft_cross_entropy,
    softmax,
)

EXACT_TOL = 1e-9
GRAD_TOL = 1e-5
FAULTS = ("row-sum",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def corrupt_adjacency(adj, fault="row-sum"):
    """Copy of ``adj`` with node 0's row scaled by 1.1."""
    if fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    base = adj.base.copy()
    base.data[base.indptr[0]:base.indptr[1]] *= 1.1
    return NormalizedAdjacency(base, adj.self_loops, adj.power, adj.normalization)


def check_row_stochastic(adj):
    sums = adj.row_sums()
    worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
    bad = int(np.argmax(np.abs(sums - 1.0))) if sums.size else -1
    ok = worst <= EXACT_TOL and adj.base.data.min(initial=0.0) >= 0
    if adj.self_loops:
        ok = ok and bool(np.all(adj.base.diagonal() > 0))
    return CheckResult("row_stochastic", ok, f"max |row sum - 1| = {worst:.3g} (node {bad})")


def _random_model(spec, graph, adj, seed):
    params = init_params(spec, graph.feature_dim, graph.num_classes, seed)
    return TrainedModel(spec, params, None, adj, seed, {"edges_key": _edges_key(graph)})


def check_mixup_equivalence(graph, adj, nodes=None, seed=0):
    """Matrix-form inference vs per-node explicit mixing for the Mixup-exact families."""
    if nodes is None:
        nodes = range(graph.num_nodes)
    nodes = list(nodes)
    specs = [ModelSpec("gcn", 1), ModelSpec("tmlp", 1), ModelSpec("ppnp", 2, hidden_dim=8)]
    specs += [ModelSpec("sgc", k) for k in (1, 2, 3)]
    worst, where = 0.0, ""
    for spec in specs:
        model = _random_model(spec, graph, adj, seed)
        full = predict(model, graph)
        for i in nodes:
            err = float(np.max(np.abs(mixup_form_predict(model, graph, i) - full[i])))
            if err > worst:
                worst, where = err, f"{spec.kind}-{spec.depth} node {i}"
    ok = worst <= EXACT_TOL
    return CheckResult("mixup_equivalence", ok,
                       f"max |diff| = {worst:.3g}" + (f" at {where}" if where else ""))


def check_layerwise_gcn2(graph, adj, seed=0):
    params = init_params(ModelSpec("gcn", 2, hidden_dim=8), graph.feature_dim,
                         graph.num_classes, seed)
    r = layerwise_mixup_residual(params, adj, graph.features)
    return CheckResult("layerwise_gcn2", r <= EXACT_TOL, f"max |diff| = {r:.3g}")


def check_relabel_example():
    g = synthetic_graph("three_node_example")
    soft = homophily_relabel(g, normalize_adjacency(g)).matrix
    expected = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    ok = bool(np.array_equal(soft, expected))
    return CheckResult("relabel_three_node", ok, f"rows {soft.tolist()}")


def check_ideal_mixup_loss(trials=20, seed=0):
    """Two mixed targets on a shared prediction give -2(0.5 log p0 + 0.5 log p1)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        logits = rng.normal(size=(1, 2))
        p0, p1 = softmax(logits)[0]
        both = np.vstack([logits, logits])
        loss, _ = soft_cross_entropy(both, np.array([[1.0, 0.0], [0.0, 1.0]]))
        worst = max(worst, abs(loss + 2 * (0.5 * np.log(p0) + 0.5 * np.log(p1))))
    return CheckResult("ideal_mixup_loss", worst <= EXACT_TOL, f"max |diff| = {worst:.3g}")


def edgeless(graph):
    return graph.with_edges(np.empty((0, 2), dtype=np.int64))


def check_edgeless_collapse(graph, seed=0):
    g = edgeless(graph)
    adj = normalize_adjacency(g)
    bad = []
    for depth in (1, 2, 3):
        mlp = predict(_random_model(ModelSpec("mlp", depth, hidden_dim=8), g, adj, seed), g)
        for kind in ("gcn", "tmlp", "unified", "ppnp"):
            out = predict(_random_model(ModelSpec(kind, depth, hidden_dim=8), g, adj, seed), g)
            if not np.array_equal(out, mlp):
                bad.append(f"{kind}-{depth}")
    return CheckResult("edgeless_collapse", not bad,
                       "bitwise equal to MLP" if not bad else "differs: " + ", ".join(bad))


def loss_and_grads(spec, graph, adj, params):
    targets, weights, _ = training_targets(graph, spec, adj)
    tape = Tape(len(params))
    logits = run_layout(params, adj, graph.features, train_layout(spec), tape=tape)
    loss = tape.softmax_cross_entropy(logits, targets, weights)
    return loss, backward(tape)


def gradient_error(spec, graph, adj=None, seed=0):
    """Norm-wise relative error between tape gradients and central differences."""
    if adj is None:
        adj = normalize_adjacency(graph, spec.self_loops, spec.normalization)
    targets, weights, _ = training_targets(graph, spec, adj)
    layout = train_layout(spec)
    params = init_params(spec, graph.feature_dim, graph.num_classes, seed)
    _, grads = loss_and_grads(spec, graph, adj, params)

    def f(ps):
        out = run_layout(ps, adj, graph.features, layout)
        return soft_cross_entropy(out, targets, weights)[0]

    fd = central_difference(f, [p.copy() for p in params])
    a = np.concatenate([g.ravel() for g in grads])
    b = np.concatenate([g.ravel() for g in fd])
    return relative_error(a, b)


def toy_graph(seed=0, n=6, d=4, c=3):
    """Small random connected graph with every split populated."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1), (1, 4)]
    labels = np.arange(n) % c
    train = np.zeros(n, bool)
    train[[0, 1, 2]] = True
    val = np.zeros(n, bool)
    val[3] = True
    test = np.zeros(n, bool)
    test[[4, 5]] = True
    return Graph(X, edges, labels, c, train, val, test, name="toy")


GRAD_FAMILIES = ("mlp", "gcn", "sgc", "ppnp", "hmlp", "tmlp", "unified")


def check_gradients(seed=0):
    g = toy_graph(seed)
    worst, where = 0.0, ""
    for kind in GRAD_FAMILIES:
        for depth in (1, 2):
            spec = ModelSpec(kind, depth, hidden_dim=5, relabel_power=depth)
            err = gradient_error(spec, g, seed=seed)
            if err > worst:
                worst, where = err, f"{kind}-{depth}"
    return CheckResult("gradients", worst <= GRAD_TOL, f"max rel err = {worst:.3g} ({where})")


def run_suite(graph, inject=None, max_nodes=200, seed=0):
    """Every check against ``graph``; mixing checks use at most ``max_nodes`` nodes."""
    adj = normalize_adjacency(graph)
    if inject:
        adj = corrupt_adjacency(adj, inject)
    n = graph.num_nodes
    nodes = range(n) if n <= max_nodes else np.linspace(0, n - 1, max_nodes).astype(int)
    return [
        check_row_stochastic(adj),
        check_mixup_equivalence(graph, adj, nodes, seed),
        check_layerwise_gcn2(graph, adj, seed),
        check_relabel_example(),
        check_ideal_mixup_loss(seed=seed),
        check_edgeless_collapse(graph, seed),
        check_gradients(seed),
    ]


__all__ = ["CheckResult", "run_suite", "corrupt_adjacency", "gradient_error", "toy_graph",
           "check_row_stochastic", "check_mixup_equivalence", "check_layerwise_gcn2",
           "check_relabel_example", "check_ideal_mixup_loss", "check_edgeless_collapse",
           "check_gradients", "edgeless", "loss_and_grads"]
