"""Dense numerics: loss, reverse-mode tape, optimizers, init, PCA.

The tape supports exactly the primitives the models need: sparse
aggregation, dense multiplication by a weight matrix, relu and soft-target
softmax cross-entropy. Gradients are analytic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateInput,
    NonFiniteInput,
    ShapeMismatch,
    TapeConsumed,
)


def log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def soft_cross_entropy(logits, targets, row_weights=None):
    """Weighted soft-target cross-entropy and its gradient w.r.t. the logits.

    ``loss = sum_i w_i * -sum_c t_ic log softmax(logits)_ic``. With ``row_weights``
    omitted every row has weight 1.

    Returns:
        (loss, grad_logits)
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ShapeMismatch(f"logits {logits.shape} vs targets {targets.shape}")
    if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(targets))):
        raise NonFiniteInput("non-finite logits or targets")
    n = logits.shape[0]
    w = np.ones(n) if row_weights is None else np.asarray(row_weights, dtype=np.float64)
    if w.shape != (n,):
        raise ShapeMismatch(f"row_weights must have shape ({n},)")
    if np.any(w < 0):
        raise ValueError("row weights must be non-negative")
    logp = log_softmax(logits)
    loss = float(-(w * (targets * logp).sum(axis=1)).sum())
    tsum = targets.sum(axis=1, keepdims=True)
    grad = w[:, None] * (np.exp(logp) * tsum - targets)
    return loss, grad


def relu(x):
    return np.maximum(x, 0.0)


class Tape:
    """Records a forward pass for one reverse sweep.

    Each step caches what its backward rule needs. ``backward`` may be called
    once; a second call raises :class:`TapeConsumed` until :meth:`reset`.
    """

    def __init__(self, num_params):
        self.num_params = num_params
        self.steps = []
        self.consumed = False
        self.loss = None

    def reset(self):
        self.steps.clear()
        self.consumed = False
        self.loss = None

    def aggregate(self, adj, x):
        """Sparse multiply by a (possibly powered) normalized adjacency."""
        self.steps.append(("aggregate", adj))
        return adj.apply(x)

    def matmul(self, x, w, index):
        if x.shape[1] != w.shape[0]:
            raise ShapeMismatch(f"cannot multiply {x.shape} by {w.shape}")
        self.steps.append(("matmul", x, w, index))
        return x @ w

    def relu(self, x):
        mask = x > 0
        self.steps.append(("relu", mask))
        return np.where(mask, x, 0.0)

    def softmax_cross_entropy(self, logits, targets, row_weights=None):
        loss, grad = soft_cross_entropy(logits, targets, row_weights)
        self.steps.append(("loss", grad))
        self.loss = loss
        return loss


def backward(tape, grad_seed=None):
    """Reverse sweep over ``tape``; returns one gradient per parameter slot.

    ``grad_seed`` is the gradient of the objective w.r.t. the tape's final
    output. It defaults to 1.0 when the tape ends with a loss step.
    Parameters never touched by the tape get ``None``.
    """
    if tape.consumed:
        raise TapeConsumed("tape already replayed; call reset() and run forward again")
    tape.consumed = True
    grads = [None] * tape.num_params
    steps = tape.steps
    if steps and steps[-1][0] == "loss":
        scale = 1.0 if grad_seed is None else float(np.asarray(grad_seed).reshape(()))
        g = steps[-1][1] * scale
        steps = steps[:-1]
    else:
        if grad_seed is None:
            raise ValueError("grad_seed required for a tape without a loss step")
        g = np.asarray(grad_seed, dtype=np.float64)

    # nothing upstream of the first matmul has parameters
    first = next((i for i, s in enumerate(steps) if s[0] == "matmul"), len(steps))
    for i in range(len(steps) - 1, first - 1, -1):
        step = steps[i]
        kind = step[0]
        if kind == "matmul":
            _, x, w, index = step
            gw = x.T @ g
            grads[index] = gw if grads[index] is None else grads[index] + gw
            if i > first:
                g = g @ w.T
        elif kind == "relu":
            g = np.where(step[1], g, 0.0)
        elif kind == "aggregate":
            g = step[1].apply_transpose(g)
        else:
            raise ValueError(f"unexpected step {kind!r} inside tape")
    return grads


@dataclass
class OptimizerState:
    kind: str = "sgd"
    lr: float = 0.1
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


def optimizer_step(state, params, grads):
    """Apply one update and return the new parameter list (inputs are not modified)."""
    if len(params) != len(grads):
        raise ShapeMismatch("params and grads differ in length")
    for p, g in zip(params, grads):
        if g is not None and np.shape(p) != np.shape(g):
            raise ShapeMismatch(f"param {np.shape(p)} vs grad {np.shape(g)}")
    grads = [np.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
    if state.weight_decay:
        grads = [g + state.weight_decay * p for p, g in zip(params, grads)]
    state.step += 1
    if state.kind == "sgd":
        return [p - state.lr * g for p, g in zip(params, grads)]

    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    out = []
    for j, (p, g) in enumerate(zip(params, grads)):
        state.m[j] = b1 * state.m[j] + (1 - b1) * g
        state.v[j] = b2 * state.v[j] + (1 - b2) * g * g
        mhat = state.m[j] / c1
        vhat = state.v[j] / c2
        out.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


def glorot_init(rows, cols, seed):
    """Uniform(-a, a) with ``a = sqrt(6 / (rows + cols))``; ``seed`` may be an int or a tuple."""
    if rows < 1 or cols < 1:
        raise ValueError("dimensions must be positive")
    a = np.sqrt(6.0 / (rows + cols))
    rng = np.random.default_rng(seed)
    return rng.uniform(-a, a, size=(rows, cols))


def central_difference(f, params, eps=1e-5):
    """Central finite-difference gradient of scalar ``f(params)`` for every entry."""
    out = []
    for j, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            up = f(params)
            p[idx] = old - eps
            down = f(params)
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        out.append(g)
    return out


def relative_error(a, b):
    """``||a - b|| / max(||a||, ||b||)``, 0 when both vanish."""
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


@dataclass(frozen=True)
class PCAFit:
    mean: np.ndarray
    components: np.ndarray  # (2, d)
    explained_variance: np.ndarray  # all eigenvalues, descending

    def transform(self, points):
        return (np.asarray(points, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, coords):
        return np.asarray(coords, dtype=np.float64) @ self.components + self.mean


def pca_fit(points):
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DegenerateInput("pca needs at least two points")
    mean = x.mean(axis=0)
    xc = x - mean
    if not np.any(xc):
        raise DegenerateInput("points have zero variance")
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    ev = s ** 2 / (x.shape[0] - 1)
    comps = np.zeros((2, x.shape[1]))
    k = min(2, vt.shape[0])
    comps[:k] = vt[:k]
    for r in range(k):
        j = np.argmax(np.abs(comps[r]))
        if comps[r, j] < 0:
            comps[r] = -comps[r]
    return PCAFit(mean, comps, ev)


def pca_2d(points):
    """Project onto the top two principal components of the centered points."""
    return pca_fit(points).transform(points)
