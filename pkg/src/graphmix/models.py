"""Model families, their Mixup-form counterparts, and the HMLP/TMLP constructions.

Every model is a list of weight matrices plus a *layout*: the sequence of
aggregate / linear / relu steps applied to the feature matrix. MLP, GCN,
SGC and PPNP differ only in where aggregation steps sit. HMLP, TMLP and the
unified model train an MLP layout; TMLP and unified then run the GCN layout
with the same weights at inference.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import (
    EmptyTrainSet,
    MissingAdjacency,
    NoCoveredNodes,
    ShapeMismatch,
    UnsupportedKind,
)
from .graph import adjacency_power, homophily_relabel, normalize_adjacency
from .numerics import glorot_init

KINDS = ("mlp", "gcn", "sgc", "ppnp", "hmlp", "tmlp", "unified")
SOFT_LABEL_KINDS = ("hmlp", "unified")
AGGREGATED_INFERENCE = ("gcn", "tmlp", "unified")


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "gcn"
    depth: int = 2
    hidden_dim: int = 64
    self_loops: bool = True
    ppnp_power: int = 2
    relabel_power: int = 1
    normalization: str = "row"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedKind(f"unknown model kind {self.kind!r}")
        if not 1 <= self.depth <= 4:
            raise ValueError("depth must be in [1, 4]")
        if self.hidden_dim < 1 or self.ppnp_power < 1 or self.relabel_power < 1:
            raise ValueError("hidden_dim, ppnp_power and relabel_power must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ModelSpec
    params: list
    relabel: object = None
    adj: object = None
    seed: int = 0
    meta: dict = field(default_factory=dict)


# -- layouts -----------------------------------------------------------------

def mlp_layout(depth):
    out = []
    for i in range(depth):
        out.append(("lin", i))
        if i < depth - 1:
            out.append(("relu",))
    return out


def gcn_layout(depth):
    out = []
    for i in range(depth):
        out += [("agg", 1), ("lin", i)]
        if i < depth - 1:
            out.append(("relu",))
    return out


def sgc_layout(power):
    return [("agg", power), ("lin", 0)]


def ppnp_layout(depth, power):
    return mlp_layout(depth) + [("agg", power)]


def train_layout(spec):
    if spec.kind == "gcn":
        return gcn_layout(spec.depth)
    if spec.kind == "sgc":
        return sgc_layout(spec.depth)
    if spec.kind == "ppnp":
        return ppnp_layout(spec.depth, spec.ppnp_power)
    return mlp_layout(spec.depth)


def inference_layout(spec):
    if spec.kind in AGGREGATED_INFERENCE:
        return gcn_layout(spec.depth)
    return train_layout(spec)


def layer_shapes(spec, feature_dim, num_classes):
    if spec.kind == "sgc":
        return [(feature_dim, num_classes)]
    dims = [feature_dim] + [spec.hidden_dim] * (spec.depth - 1) + [num_classes]
    return list(zip(dims[:-1], dims[1:]))


def init_params(spec, feature_dim, num_classes, seed):
    return [glorot_init(r, c, (seed, i))
            for i, (r, c) in enumerate(layer_shapes(spec, feature_dim, num_classes))]


def check_chain(params, feature_dim):
    d = feature_dim
    for i, w in enumerate(params):
        if w.ndim != 2 or w.shape[0] != d:
            raise ShapeMismatch(f"layer {i}: expected {d} input rows, got shape {w.shape}")
        d = w.shape[1]


def run_layout(params, adj, x, layout, tape=None, collect=None):
    """Apply ``layout`` to ``x``.

    ``collect`` (a list) receives the output of every linear layer after its
    activation, i.e. per-layer node representations.
    """
    h = x
    n_lin = sum(1 for s in layout if s[0] == "lin")
    seen = 0
    for step in layout:
        op = step[0]
        if op == "agg":
            if adj is None:
                raise MissingAdjacency("layout aggregates but no adjacency was given")
            a = adjacency_power(adj, step[1])
            h = tape.aggregate(a, h) if tape is not None else a.apply(h)
        elif op == "lin":
            w = params[step[1]]
            if h.shape[1] != w.shape[0]:
                raise ShapeMismatch(f"cannot multiply {h.shape} by {w.shape}")
            h = tape.matmul(h, w, step[1]) if tape is not None else h @ w
            seen += 1
            if collect is not None and seen == n_lin:
                collect.append(h)
        elif op == "relu":
            h = tape.relu(h) if tape is not None else np.maximum(h, 0.0)
            if collect is not None:
                collect.append(h)
    if collect is not None and layout and layout[-1][0] == "agg":
        collect.append(h)
    return h


# -- plain forwards ----------------------------------------------------------

def forward_mlp(params, X):
    check_chain(params, X.shape[1])
    return run_layout(params, None, X, mlp_layout(len(params)))


def forward_gcn(params, adj, X, depth=None):
    """Pre-softmax logits of a ``depth``-layer GCN: aggregate before every linear layer."""
    depth = len(params) if depth is None else depth
    if depth != len(params):
        raise ShapeMismatch(f"depth {depth} but {len(params)} weight matrices")
    check_chain(params, X.shape[1])
    return run_layout(params, adj, X, gcn_layout(depth))


def forward_sgc(params, adj_k, X):
    """``A^k X W`` with ``k = adj_k.power``."""
    if len(params) != 1:
        raise ShapeMismatch("SGC has exactly one weight matrix")
    check_chain(params, X.shape[1])
    return adj_k.apply(X) @ params[0]


def forward_ppnp(params, adj_k, X):
    """Aggregate MLP logits: ``A^k MLP(X)``."""
    check_chain(params, X.shape[1])
    return adj_k.apply(forward_mlp(params, X))


# -- Mixup-form oracle -------------------------------------------------------

def mixup_coefficients(adj, node, power=1):
    """Mixing weights for ``node``: the node's row of ``A^power``, as {neighbor: weight}."""
    row = adjacency_power(adj, power).row(node)
    nz = np.flatnonzero(row)
    return dict(zip(nz.tolist(), row[nz].tolist()))


def _mix(rows, coeffs):
    out = None
    for j, lam in coeffs.items():
        term = lam * rows(j)
        out = term if out is None else out + term
    return out


def mixup_form_predict(model, graph, node):
    """Logits for one node computed as an explicit weighted mix of neighbor samples.

    GCN-1 (and the depth-1 TMLP/unified inference) mixes raw features, SGC-k
    mixes features over the k-hop row, PPNP mixes per-node MLP logits. No
    matrix-matrix product is used.
    """
    spec = model.spec
    adj = model.adj if model.adj is not None else normalize_adjacency(
        graph, spec.self_loops, spec.normalization)
    X = graph.features
    if spec.kind in AGGREGATED_INFERENCE and spec.depth == 1:
        coeffs = mixup_coefficients(adj, node, 1)
        return _mix(lambda j: X[j], coeffs) @ model.params[0]
    if spec.kind == "sgc":
        coeffs = mixup_coefficients(adj, node, spec.depth)
        return _mix(lambda j: X[j], coeffs) @ model.params[0]
    if spec.kind == "ppnp":
        coeffs = mixup_coefficients(adj, node, spec.ppnp_power)
        return _mix(lambda j: forward_mlp(model.params, X[j:j + 1])[0], coeffs)
    raise UnsupportedKind(
        f"{spec.kind}-{spec.depth} has nonlinearity between aggregations; "
        "use layerwise_mixup_residual")


def layerwise_mixup_residual(params, adj, X):
    """Max deviation between ``A H`` and explicit neighbor averages of first-layer ``H``.

    ``H = relu(A X W1)`` is the input to the second GCN layer.
    """
    H = np.maximum(adj.apply(X) @ params[0], 0.0)
    AH = adj.apply(H)
    worst = 0.0
    for i in range(adj.num_nodes):
        mixed = _mix(lambda j: H[j], mixup_coefficients(adj, i, 1))
        worst = max(worst, float(np.max(np.abs(mixed - AH[i]))))
    return worst


# -- targets and prediction --------------------------------------------------

def training_targets(graph, spec, adj):
    """Targets and per-row loss weights used to train ``spec`` on ``graph``.

    Hard-label kinds use the train mask; HMLP/unified use soft labels on every
    covered node. Weights average the loss over contributing rows.
    """
    if spec.kind in SOFT_LABEL_KINDS:
        relabel = homophily_relabel(graph, adj, spec.relabel_power)
        if relabel.num_covered == 0:
            raise NoCoveredNodes("no node has a train-labeled contributor")
        w = relabel.coverage_mask / relabel.num_covered
        return np.asarray(relabel.matrix), w, relabel
    n_train = int(graph.train_mask.sum())
    if n_train == 0:
        raise EmptyTrainSet("train mask is empty")
    return graph.one_hot(graph.train_mask), graph.train_mask / n_train, None


def _adjacency_for(model, graph):
    if model.adj is not None and model.adj.num_nodes == graph.num_nodes \
            and model.meta.get("edges_key") == _edges_key(graph):
        return model.adj
    return normalize_adjacency(graph, model.spec.self_loops, model.spec.normalization)


def _edges_key(graph):
    h = hashlib.sha1(graph.edges.tobytes())
    h.update(str(graph.num_nodes).encode())
    return h.hexdigest()


def predict(model, graph):
    """Inference logits ``[N, C]`` for any trained model."""
    layout = inference_layout(model.spec)
    adj = _adjacency_for(model, graph) if any(s[0] == "agg" for s in layout) else None
    return run_layout(model.params, adj, graph.features, layout)


def predict_mlp(model, graph):
    """Plain MLP forward with the model's weights (no aggregation)."""
    if model.spec.kind == "sgc":
        raise UnsupportedKind("SGC weights have no MLP reading")
    return forward_mlp(model.params, graph.features)


def predict_tmlp(model, graph):
    """Test-Time Mixup inference: the GCN layout of the same depth with the MLP's weights."""
    if model.adj is None:
        raise MissingAdjacency("model carries no adjacency for test-time aggregation")
    if model.spec.kind == "sgc":
        raise UnsupportedKind("SGC weights have no MLP reading")
    return run_layout(model.params, _adjacency_for(model, graph), graph.features,
                      gcn_layout(len(model.params)))


def hidden_representations(model, graph, aggregated):
    """Per-layer representations under the MLP (``aggregated=False``) or GCN layout."""
    layout = gcn_layout(len(model.params)) if aggregated else mlp_layout(len(model.params))
    reps = []
    adj = _adjacency_for(model, graph) if aggregated else None
    run_layout(model.params, adj, graph.features, layout, collect=reps)
    return reps


# -- training entry points ---------------------------------------------------

def train_hmlp(graph, spec, train_config):
    if spec.kind != "hmlp":
        raise UnsupportedKind("train_hmlp needs spec.kind == 'hmlp'")
    from .trainer import fit
    return fit(graph, spec, train_config)[0]


def train_tmlp(graph, spec, train_config):
    if spec.kind != "tmlp":
        raise UnsupportedKind("train_tmlp needs spec.kind == 'tmlp'")
    from .trainer import fit
    return fit(graph, spec, train_config)[0]


def train_unified(graph, spec, train_config):
    if spec.kind != "unified":
        raise UnsupportedKind("train_unified needs spec.kind == 'unified'")
    from .trainer import fit
    return fit(graph, spec, train_config)[0]


# -- serialization -----------------------------------------------------------

MAGIC = "graphmix-model"


def save_model(model, path):
    """JSON header line, then each weight matrix as little-endian float64, row-major, in layer order."""
    header = {
        "format": MAGIC,
        "version": 1,
        "spec": model.spec.to_dict(),
        "shapes": [list(w.shape) for w in model.params],
        "seed": model.seed,
        "dtype": "<f8",
        "meta": {k: v for k, v in model.meta.items() if k != "edges_key"},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for w in model.params:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_model(path, graph=None):
    """Read a model written by :func:`save_model`.

    When ``graph`` is given, the adjacency (and soft labels for HMLP/unified)
    are rebuilt from it so the model is ready for aggregated inference.
    """
    with open(path, "rb") as fh:
        first = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(first.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: not a model checkpoint") from exc
    if header.get("format") != MAGIC:
        raise ValueError(f"{path}: not a model checkpoint")
    spec = ModelSpec(**header["spec"])
    params, off = [], 0
    for r, c in header["shapes"]:
        n = r * c * 8
        if off + n > len(payload):
            raise ShapeMismatch(f"{path}: truncated weight payload")
        params.append(np.frombuffer(payload[off:off + n], dtype="<f8").reshape(r, c).copy())
        off += n
    if off != len(payload):
        raise ShapeMismatch(f"{path}: trailing bytes after weights")
    adj = relabel = None
    meta = dict(header.get("meta", {}))
    if graph is not None:
        check_chain(params, graph.feature_dim)
        adj = normalize_adjacency(graph, spec.self_loops, spec.normalization)
        if spec.kind in SOFT_LABEL_KINDS:
            relabel = homophily_relabel(graph, adj, spec.relabel_power)
        meta["edges_key"] = _edges_key(graph)
    return TrainedModel(spec, params, relabel, adj, header.get("seed", 0), meta)
