import math

import numpy as np
import pytest

from cdcoref.nn import (
    Adam,
    bce_loss,
    dense_backward,
    dense_forward,
    ffnn_backward,
    ffnn_forward,
    finite_difference_grads,
    gradient_check,
    init_dense,
    init_ffnn,
    relative_error,
    sigmoid,
    xavier_init,
    zero_grads_like,
)


def test_xavier_bounds_and_shapes():
    rng = np.random.default_rng(0)
    W = xavier_init((50, 30), rng)
    assert W.shape == (50, 30)
    bound = math.sqrt(6.0 / 80.0)
    assert np.all(np.abs(W) <= bound)
    assert np.abs(W).max() > 0.5 * bound  # actually spread out
    v = xavier_init((40,), rng)
    assert np.all(np.abs(v) <= math.sqrt(6.0 / 80.0))
    with pytest.raises(ValueError):
        xavier_init((2, 3, 4), rng)


def test_dense_forward_shape_check():
    rng = np.random.default_rng(1)
    params = {}
    init_dense(params, "layer", 4, 7, rng)
    x = rng.standard_normal((5, 7))
    y, _ = dense_forward(params, "layer", x)
    assert y.shape == (5, 4)
    with pytest.raises(ValueError):
        dense_forward(params, "layer", rng.standard_normal((5, 6)))


def test_sigmoid_stable_and_correct():
    assert sigmoid(np.array(0.0)) == 0.5
    assert sigmoid(np.array(500.0)) == pytest.approx(1.0)
    assert sigmoid(np.array(-500.0)) == pytest.approx(0.0)
    x = np.linspace(-5, 5, 11)
    assert np.allclose(sigmoid(x), 1.0 / (1.0 + np.exp(-x)))


def test_bce_zero_logit_positive_label():
    loss, grad = bce_loss(np.array([0.0]), np.array([1.0]))
    assert loss == pytest.approx(math.log(2.0), abs=1e-12)
    assert grad[0] == pytest.approx(-0.5, abs=1e-12)


def test_bce_matches_naive_formula():
    rng = np.random.default_rng(2)
    for _ in range(20):
        logits = rng.standard_normal(8) * 3
        labels = rng.integers(0, 2, size=8).astype(float)
        loss, grad = bce_loss(logits, labels)
        p = 1.0 / (1.0 + np.exp(-logits))
        naive = -(labels * np.log(p) + (1 - labels) * np.log(1 - p)).mean()
        assert loss == pytest.approx(naive, abs=1e-10)
        assert np.allclose(grad, (p - labels) / 8)


def test_bce_extreme_logits_do_not_overflow():
    loss, grad = bce_loss(np.array([800.0, -800.0]), np.array([0.0, 1.0]))
    assert math.isfinite(loss)
    assert loss == pytest.approx(800.0, rel=1e-9)
    assert np.all(np.isfinite(grad))


def test_bce_positive_only_drops_negative_term():
    logits = np.array([1.2, -0.7])
    labels = np.array([1.0, 0.0])
    loss, grad = bce_loss(logits, labels, positive_only=True)
    p = 1.0 / (1.0 + np.exp(-logits))
    assert loss == pytest.approx(-math.log(p[0]) / 2, abs=1e-12)
    assert grad[1] == 0.0


def test_bce_gradient_matches_finite_difference():
    rng = np.random.default_rng(3)
    logits = rng.standard_normal(6)
    labels = rng.integers(0, 2, size=6).astype(float)
    _, grad = bce_loss(logits, labels)
    h = 1e-6
    for i in range(6):
        bumped = logits.copy()
        bumped[i] += h
        up, _ = bce_loss(bumped, labels)
        bumped[i] -= 2 * h
        down, _ = bce_loss(bumped, labels)
        assert grad[i] == pytest.approx((up - down) / (2 * h), abs=1e-7)


def test_adam_first_step_is_minus_lr():
    # With gradient 1: m_hat = 1, v_hat = 1, step = -lr/(1+eps) ~ -1e-4.
    params = {"w": np.array([0.0])}
    opt = Adam(params, lr=1e-4)
    opt.step(params, {"w": np.array([1.0])})
    assert params["w"][0] == pytest.approx(-1e-4, rel=1e-6)


def test_adam_skip_set_freezes_parameters():
    params = {"a": np.zeros(3), "b": np.zeros(3)}
    opt = Adam(params)
    grads = {"a": np.ones(3), "b": np.ones(3)}
    opt.step(params, grads, skip=frozenset({"b"}))
    assert np.all(params["a"] != 0.0)
    assert np.all(params["b"] == 0.0)


def test_adam_state_round_trip():
    rng = np.random.default_rng(4)
    params = {"w": rng.standard_normal(4)}
    opt = Adam(params)
    for _ in range(3):
        opt.step(params, {"w": rng.standard_normal(4)})
    stored = {k: v.copy() for k, v in opt.state_tensors().items()}

    fresh_params = {"w": params["w"].copy()}
    fresh = Adam(fresh_params)
    fresh.load_state_tensors(stored)
    g = rng.standard_normal(4)
    opt.step(params, {"w": g})
    fresh.step(fresh_params, {"w": g})
    assert np.array_equal(params["w"], fresh_params["w"])


def test_ffnn_forward_eval_deterministic_training_needs_rng():
    rng = np.random.default_rng(5)
    params = {}
    init_ffnn(params, "net", 6, 9, rng)
    x = rng.standard_normal((4, 6))
    s1, _ = ffnn_forward(params, "net", x)
    s2, _ = ffnn_forward(params, "net", x)
    assert np.array_equal(s1, s2)
    assert s1.shape == (4,)
    with pytest.raises(ValueError):
        ffnn_forward(params, "net", x, training=True, dropout=0.3)


def test_ffnn_dropout_scales_expectation():
    rng = np.random.default_rng(6)
    params = {}
    init_ffnn(params, "net", 5, 64, rng)
    x = rng.standard_normal((8, 5))
    eval_scores, _ = ffnn_forward(params, "net", x)
    runs = np.stack([
        ffnn_forward(params, "net", x, training=True, dropout=0.3,
                     rng=np.random.default_rng(i))[0]
        for i in range(400)
    ])
    # Inverted dropout keeps the expected pre-head activations unchanged.
    assert np.allclose(runs.mean(axis=0), eval_scores, atol=0.25)


def test_ffnn_backward_matches_finite_difference():
    rng = np.random.default_rng(7)
    for trial in range(5):
        params = {}
        init_ffnn(params, "net", 4, 6, rng)
        x = rng.standard_normal((3, 4))
        labels = rng.integers(0, 2, size=3).astype(float)

        def loss_fn(p):
            scores, _ = ffnn_forward(p, "net", x)
            loss, _ = bce_loss(scores, labels)
            return loss

        scores, cache = ffnn_forward(params, "net", x)
        loss, dscores = bce_loss(scores, labels)
        grads = {}
        dx = ffnn_backward(params, "net", cache, dscores, grads)
        errs = gradient_check(loss_fn, params, grads)
        assert max(errs.values()) <= 1e-4

        # Input gradient against finite differences as well.
        fd_dx = np.zeros_like(x)
        h = 1e-5
        for i in range(x.size):
            orig = x.flat[i]
            x.flat[i] = orig + h
            up = loss_fn(params)
            x.flat[i] = orig - h
            down = loss_fn(params)
            x.flat[i] = orig
            fd_dx.flat[i] = (up - down) / (2 * h)
        assert relative_error(dx, fd_dx) <= 1e-4


def test_ffnn_backward_respects_frozen_dropout_mask():
    rng = np.random.default_rng(8)
    params = {}
    init_ffnn(params, "net", 4, 6, rng)
    x = rng.standard_normal((3, 4))
    labels = np.array([1.0, 0.0, 1.0])
    scores, cache = ffnn_forward(params, "net", x, training=True, dropout=0.4,
                                 rng=np.random.default_rng(99))
    loss, dscores = bce_loss(scores, labels)
    grads = {}
    ffnn_backward(params, "net", cache, dscores, grads)
    mask = cache[2]

    def loss_fn(p):
        pre, _ = dense_forward(p, "net.hidden", x)
        h = np.maximum(pre, 0.0) * mask
        out, _ = dense_forward(p, "net.out", h)
        return bce_loss(out[:, 0], labels)[0]

    errs = gradient_check(loss_fn, params, grads)
    assert max(errs.values()) <= 1e-4


def test_finite_difference_on_quadratic():
    params = {"w": np.array([1.0, -2.0, 3.0])}

    def loss_fn(p):
        return float((p["w"] ** 2).sum())

    fd = finite_difference_grads(loss_fn, params)
    assert np.allclose(fd["w"], 2 * params["w"], atol=1e-7)


def test_relative_error_properties():
    a = np.array([1.0, 2.0])
    assert relative_error(a, a) == 0.0
    assert relative_error(a, np.zeros(2)) == pytest.approx(1.0)
    assert relative_error(np.zeros(2), np.zeros(2)) == 0.0


def test_zero_grads_like_shapes():
    params = {"a": np.ones((2, 3)), "b": np.ones(4)}
    grads = zero_grads_like(params)
    assert set(grads) == {"a", "b"}
    assert grads["a"].shape == (2, 3)
    assert not grads["a"].any()


def test_dense_backward_accumulates():
    rng = np.random.default_rng(9)
    params = {}
    init_dense(params, "layer", 3, 5, rng)
    x = rng.standard_normal((2, 5))
    _, cache = dense_forward(params, "layer", x)
    dy = rng.standard_normal((2, 3))
    grads = {}
    dense_backward(params, "layer", cache, dy, grads)
    first = grads["layer.W"].copy()
    dense_backward(params, "layer", cache, dy, grads)
    assert np.allclose(grads["layer.W"], 2 * first)
