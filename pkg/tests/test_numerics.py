import numpy as np
import pytest

from graphmix.exceptions import DegenerateInput, NonFiniteInput, ShapeMismatch, TapeConsumed
from graphmix.numerics import (
    OptimizerState,
    Tape,
    backward,
    central_difference,
    glorot_init,
    optimizer_step,
    pca_2d,
    pca_fit,
    relative_error,
    soft_cross_entropy,
    softmax,
)


def test_uniform_loss_is_log_c():
    loss, _ = soft_cross_entropy(np.zeros((3, 4)), np.full((3, 4), 0.25))
    assert loss == pytest.approx(3 * np.log(4), abs=1e-12)


def test_ideal_mixup_form(rng):
    for _ in range(20):
        logits = rng.normal(size=(1, 2))
        p0, p1 = softmax(logits)[0]
        loss, _ = soft_cross_entropy(np.vstack([logits, logits]), np.eye(2))
        assert loss == pytest.approx(-2 * (0.5 * np.log(p0) + 0.5 * np.log(p1)), abs=1e-12)


def test_loss_gradient_finite_difference(rng):
    logits = rng.normal(size=(3, 5))
    t = rng.dirichlet(np.ones(5), size=3)
    w = rng.uniform(0.1, 1.0, size=3)
    _, grad = soft_cross_entropy(logits, t, w)
    fd = central_difference(lambda ps: soft_cross_entropy(ps[0], t, w)[0], [logits.copy()])[0]
    assert relative_error(grad, fd) < 1e-6


def test_loss_shift_invariant(rng):
    logits = rng.normal(size=(4, 3))
    t = rng.dirichlet(np.ones(3), size=4)
    a, _ = soft_cross_entropy(logits, t)
    b, _ = soft_cross_entropy(logits + 7.5, t)
    assert a == pytest.approx(b, abs=1e-9)


def test_loss_errors():
    with pytest.raises(NonFiniteInput):
        soft_cross_entropy(np.array([[np.nan, 0.0]]), np.array([[1.0, 0.0]]))
    with pytest.raises(ShapeMismatch):
        soft_cross_entropy(np.zeros((2, 2)), np.zeros((2, 3)))


def test_large_logits_stable():
    loss, grad = soft_cross_entropy(np.array([[1000.0, -1000.0]]), np.array([[1.0, 0.0]]))
    assert loss == pytest.approx(0.0) and np.all(np.isfinite(grad))


def test_linear_tape_gradient(rng):
    X, W = rng.normal(size=(6, 3)), rng.normal(size=(3, 2))
    seed = rng.normal(size=(6, 2))
    tape = Tape(1)
    tape.matmul(X, W, 0)
    np.testing.assert_allclose(backward(tape, seed)[0], X.T @ seed, atol=1e-12)


def test_two_layer_relu_tape(rng):
    X = rng.normal(size=(6, 4))
    params = [rng.normal(size=(4, 5)), rng.normal(size=(5, 3))]
    t = np.eye(3)[rng.integers(3, size=6)]

    def f(ps):
        return soft_cross_entropy(np.maximum(X @ ps[0], 0) @ ps[1], t)[0]

    tape = Tape(2)
    h = tape.relu(tape.matmul(X, params[0], 0))
    tape.softmax_cross_entropy(tape.matmul(h, params[1], 1), t)
    grads = backward(tape)
    fd = central_difference(f, [p.copy() for p in params])
    for g, d in zip(grads, fd):
        assert relative_error(g, d) < 1e-5


def test_relu_zero_subgradient():
    tape = Tape(1)
    x = np.array([[0.0, 1.0]])
    out = tape.relu(tape.matmul(x, np.eye(2), 0))
    assert out.tolist() == [[0.0, 1.0]]
    g = backward(tape, np.ones((1, 2)))[0]
    # column 0 saw relu input exactly 0, so no gradient flows through it
    assert g[:, 0].tolist() == [0.0, 0.0]


def test_tape_consumed():
    tape = Tape(1)
    tape.matmul(np.ones((1, 1)), np.ones((1, 1)), 0)
    backward(tape, np.ones((1, 1)))
    with pytest.raises(TapeConsumed):
        backward(tape, np.ones((1, 1)))
    tape.reset()
    tape.matmul(np.ones((1, 1)), np.ones((1, 1)), 0)
    backward(tape, np.ones((1, 1)))


def test_sgd_step():
    out = optimizer_step(OptimizerState("sgd", lr=0.1), [np.array([1.0])], [np.array([0.5])])
    assert out[0][0] == pytest.approx(0.95, abs=1e-15)


def test_adam_zero_gradient():
    p = [np.array([[1.0, -2.0]])]
    out = optimizer_step(OptimizerState("adam", lr=0.1), p, [np.zeros((1, 2))])
    assert np.array_equal(out[0], p[0])


def test_adam_matches_scalar_reference():
    # minimize (p - 3)^2 from p = 0, written out independently
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    p_ref, m, v = 0.0, 0.0, 0.0
    ref = []
    for t in range(1, 4):
        g = 2 * (p_ref - 3.0)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p_ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        ref.append(p_ref)
    state = OptimizerState("adam", lr=lr)
    p = [np.array([0.0])]
    for t in range(3):
        p = optimizer_step(state, p, [2 * (p[0] - 3.0)])
        assert p[0][0] == pytest.approx(ref[t], abs=1e-15)


def test_optimizer_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        optimizer_step(OptimizerState(), [np.zeros((2, 2))], [np.zeros((2, 3))])


def test_glorot():
    a = glorot_init(100, 100, 3)
    assert np.array_equal(a, glorot_init(100, 100, 3))
    bound = np.sqrt(6 / 200)
    assert np.abs(a).max() <= bound
    assert abs(a.mean()) < 3 * bound / np.sqrt(12 * 1e4)


def test_pca_2d_rotation(rng):
    pts = rng.normal(size=(30, 2))
    pts -= pts.mean(axis=0)
    proj = pca_2d(pts)
    d0 = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    d1 = np.linalg.norm(proj[:, None] - proj[None], axis=2)
    np.testing.assert_allclose(d0, d1, atol=1e-9)


def test_pca_collinear():
    base = np.array([1.0, 2.0, 0.0, -1.0, 0.5])
    fit = pca_fit(np.outer([0.0, 1.0, 3.0], base))
    assert fit.explained_variance[1] == pytest.approx(0.0, abs=1e-12)


def test_pca_reconstruction(rng):
    pts = rng.normal(size=(50, 10)) * np.linspace(3, 0.5, 10)
    fit = pca_fit(pts)
    err = np.sum((pts - fit.inverse_transform(fit.transform(pts))) ** 2) / (len(pts) - 1)
    assert err == pytest.approx(fit.explained_variance[2:].sum(), abs=1e-6)
    # sign convention: largest-magnitude loading is positive
    for comp in fit.components:
        assert comp[np.argmax(np.abs(comp))] > 0


def test_pca_degenerate():
    with pytest.raises(DegenerateInput):
        pca_2d(np.ones((4, 3)))
