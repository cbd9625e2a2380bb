"""Full-batch transductive training with validation-selected test accuracy."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .exceptions import EmptyMask, NonFiniteInput, NonFiniteLoss
from .graph import adjacency_power, normalize_adjacency
from .models import (
    TrainedModel,
    _edges_key,
    inference_layout,
    init_params,
    run_layout,
    train_layout,
    training_targets,
)
from .numerics import OptimizerState, Tape, backward, optimizer_step

# below this density the feature matrix is multiplied in CSR form
SPARSE_FEATURE_DENSITY = 0.1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 400
    optimizer: str = "sgd"
    seed: int = 0
    hidden_dim: int = 64
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class RunRecord:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    selected_epoch: int = -1
    selected_test_accuracy: float = float("nan")
    wall_time: float = field(default=0.0, compare=False)

    def to_jsonl(self):
        """One JSON object per epoch; ``selected`` marks the validation-chosen epoch."""
        lines = []
        for e in range(len(self.train_loss)):
            lines.append(json.dumps({
                "epoch": e,
                "train_loss": self.train_loss[e],
                "train_acc": self.train_acc[e],
                "val_acc": self.val_acc[e],
                "test_acc": self.test_acc[e],
                "selected": e == self.selected_epoch,
            }, sort_keys=True))
        return "\n".join(lines) + "\n"

    def summary(self):
        return {
            "epochs": len(self.train_loss),
            "selected_epoch": self.selected_epoch,
            "selected_test_accuracy": self.selected_test_accuracy,
            "final_train_loss": self.train_loss[-1] if self.train_loss else None,
            "initial_train_loss": self.train_loss[0] if self.train_loss else None,
        }


def accuracy(logits, labels, mask):
    """Fraction of ``mask`` nodes whose argmax (lowest index on ties) matches the label."""
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        raise EmptyMask("accuracy over an empty mask")
    return float(np.mean(np.argmax(logits[idx], axis=1) == labels[idx]))


def _masked_accuracy(logits, labels, mask):
    return accuracy(logits, labels, mask) if mask.any() else float("nan")


def evaluate(model, graph, mask):
    from .models import predict
    return accuracy(predict(model, graph), graph.labels, mask)


def _feature_operand(X):
    density = np.count_nonzero(X) / X.size if X.size else 1.0
    return sp.csr_matrix(X) if density < SPARSE_FEATURE_DENSITY else X


def _split_prefix(layout, adj, X):
    """Precompute the leading aggregation steps, which carry no parameters."""
    k = 0
    h = X
    while k < len(layout) and layout[k][0] == "agg":
        h = adjacency_power(adj, layout[k][1]).apply(h)
        k += 1
    return layout[k:], h


def fit(graph, spec, config, adj=None):
    """Train ``spec`` on ``graph`` for ``config.epochs`` full-batch steps.

    Accuracies are recorded after every update with the model's inference
    layout; the returned model holds the weights of the validation-selected
    epoch (earliest on ties).

    Returns:
        (TrainedModel, RunRecord)
    """
    start = time.perf_counter()
    if adj is None:
        adj = normalize_adjacency(graph, spec.self_loops, spec.normalization)
    targets, weights, relabel = training_targets(graph, spec, adj)
    params = init_params(spec, graph.feature_dim, graph.num_classes, config.seed)
    opt = OptimizerState(config.optimizer, config.lr, config.weight_decay)

    X = _feature_operand(graph.features)
    t_layout, t_input = _split_prefix(train_layout(spec), adj, X)
    i_layout, i_input = _split_prefix(inference_layout(spec), adj, X)

    labels = graph.labels
    rec = RunRecord()
    best_val, best_params = -1.0, params
    tape = Tape(len(params))
    for epoch in range(config.epochs):
        tape.reset()
        logits = run_layout(params, adj, t_input, t_layout, tape=tape)
        try:
            loss = tape.softmax_cross_entropy(logits, targets, weights)
        except NonFiniteInput as exc:
            raise NonFiniteLoss(epoch) from exc
        if not np.isfinite(loss):
            raise NonFiniteLoss(epoch)
        grads = backward(tape)
        params = optimizer_step(opt, params, grads)

        out = run_layout(params, adj, i_input, i_layout)
        rec.train_loss.append(loss)
        rec.train_acc.append(_masked_accuracy(out, labels, graph.train_mask))
        val = _masked_accuracy(out, labels, graph.val_mask)
        rec.val_acc.append(val)
        rec.test_acc.append(_masked_accuracy(out, labels, graph.test_mask))
        score = val if not np.isnan(val) else rec.train_acc[-1]
        if score > best_val:
            best_val = score
            best_params = params
            rec.selected_epoch = epoch
    rec.selected_test_accuracy = rec.test_acc[rec.selected_epoch]
    rec.wall_time = time.perf_counter() - start
    model = TrainedModel(spec, [np.array(p) for p in best_params], relabel, adj, config.seed,
                         {"edges_key": _edges_key(graph), "selected_epoch": rec.selected_epoch})
    return model, rec


@dataclass
class RepeatSummary:
    mean: float
    std: float
    accuracies: list
    seeds: list
    records: list = field(repr=False, default_factory=list)


def repeat_runs(graph, spec, config, n_seeds, n_jobs=1):
    """Run ``fit`` for seeds ``config.seed .. config.seed + n_seeds - 1``.

    Reports the sample mean and standard deviation (ddof=1) of the selected
    test accuracy. Results are ordered by seed whatever ``n_jobs`` is.
    """
    if n_seeds < 2:
        raise ValueError("repeat_runs needs at least two seeds")
    seeds = [config.seed + i for i in range(n_seeds)]
    adj = normalize_adjacency(graph, spec.self_loops, spec.normalization)

    def one(seed):
        return fit(graph, spec, replace(config, seed=seed), adj=adj)[1]

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            records = list(ex.map(one, seeds))
    else:
        records = [one(s) for s in seeds]
    accs = [r.selected_test_accuracy for r in records]
    return RepeatSummary(float(np.mean(accs)), float(np.std(accs, ddof=1)), accs, seeds, records)
