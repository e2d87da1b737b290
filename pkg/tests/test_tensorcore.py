import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extubate.exceptions import ShapeError
from extubate.tensorcore import (
    activation_backward,
    activation_forward,
    batchnorm_backward,
    batchnorm_forward,
    conv1d_causal_backward,
    conv1d_causal_forward,
    dropout_backward,
    dropout_forward,
    grad_check,
    init_kaiming_normal,
    init_uniform_lstm,
    leaky_relu,
    linear_backward,
    linear_forward,
    lstm_backward,
    lstm_forward,
    relative_error,
    sigmoid,
    zeros,
)


def _loss_weights(shape, seed=99):
    return np.random.default_rng(seed).normal(size=shape)


# ------------------------------------------------------------------ linear

def test_linear_gradcheck_tight():
    rng = np.random.default_rng(0)
    x, W, b = rng.normal(size=(4, 3)), rng.normal(size=(2, 3)), rng.normal(size=2)
    R = _loss_weights((4, 2))

    def loss():
        return float((linear_forward(x, W, b)[0] * R).sum())

    y, cache = linear_forward(x, W, b)
    dx, dW, db = linear_backward(R, cache)
    assert grad_check(loss, {"x": x, "W": W, "b": b}, {"x": dx, "W": dW, "b": db}) < 1e-7


# ------------------------------------------------------------- activations

def test_activation_values():
    assert sigmoid(np.array(0.0)) == 0.5
    assert leaky_relu(np.array(-2.0)) == pytest.approx(-0.02)
    assert np.tanh(0.0) == 0.0


@pytest.mark.parametrize("name", ["relu", "tanh", "sigmoid", "leaky_relu"])
def test_activation_gradcheck(name):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(5, 4))
    x[np.abs(x) < 1e-3] = 0.5  # keep away from the relu kink
    R = _loss_weights(x.shape)

    def loss():
        return float((activation_forward(name, x)[0] * R).sum())

    _, cache = activation_forward(name, x)
    dx = activation_backward(R, cache)
    assert grad_check(loss, {"x": x}, {"x": dx}) < 1e-6


def test_relu_kink_excluded_from_probes():
    x = np.array([[0.0, 1.0, -1.0]])
    R = np.ones_like(x)
    _, cache = activation_forward("relu", x)
    dx = activation_backward(R, cache)

    def loss():
        return float(activation_forward("relu", x)[0].sum())

    err = grad_check(loss, {"x": x}, {"x": dx}, skip={"x": lambda idx: x[idx] == 0.0})
    assert err < 1e-8


# ----------------------------------------------------------------- dropout

def test_dropout_rate_zero_is_identity():
    x = np.arange(6.0).reshape(2, 3)
    rng = np.random.default_rng(0)
    for train in (True, False):
        y, _ = dropout_forward(x, 0.0, rng, train)
        assert np.array_equal(y, x)


def test_dropout_eval_is_identity():
    x = np.arange(6.0).reshape(2, 3)
    y, cache = dropout_forward(x, 0.7, np.random.default_rng(0), False)
    assert np.array_equal(y, x)
    assert np.array_equal(dropout_backward(np.ones_like(x), cache), np.ones_like(x))


def test_dropout_expectation_matches_eval():
    x = np.array([0.5, 1.0, 2.0, -1.5])
    rng = np.random.default_rng(3)
    draws = np.stack([dropout_forward(x, 0.3, rng, True)[0] for _ in range(100_000)])
    assert np.allclose(draws.mean(axis=0), x, rtol=0.01)


def test_dropout_backward_uses_same_keep_mask():
    x = np.ones((3, 5))
    y, cache = dropout_forward(x, 0.5, np.random.default_rng(1), True)
    dx = dropout_backward(np.ones_like(x), cache)
    assert np.array_equal(dx, y)
    assert set(np.unique(y)) <= {0.0, 2.0}


# --------------------------------------------------------------- batchnorm

def test_batchnorm_constant_channel_gives_shift():
    x = np.full((4, 2, 3), 7.0)
    gamma, beta = np.array([2.0, 3.0]), np.array([0.5, -1.0])
    y, *_ = batchnorm_forward(x, gamma, beta, np.zeros(2), np.ones(2), True)
    assert np.allclose(y[:, 0], 0.5) and np.allclose(y[:, 1], -1.0)


def test_batchnorm_normalises_per_channel():
    x = np.random.default_rng(2).normal(3.0, 5.0, size=(8, 3, 5))
    y, *_ = batchnorm_forward(x, np.ones(3), np.zeros(3), np.zeros(3), np.ones(3), True, eps=0.0)
    assert np.all(np.abs(y.mean(axis=(0, 2))) < 1e-8)
    assert np.all(np.abs(y.var(axis=(0, 2)) - 1.0) < 1e-8)


def test_batchnorm_running_stats_update():
    x = np.array([[1.0], [3.0]])
    _, _, m, v = batchnorm_forward(x, np.ones(1), np.zeros(1), np.zeros(1), np.ones(1), True)
    assert m == pytest.approx(0.1 * 2.0)
    # unbiased batch variance is 2
    assert v == pytest.approx(0.9 + 0.1 * 2.0)


def test_batchnorm_rejects_single_row_in_train_mode():
    with pytest.raises(ValueError):
        batchnorm_forward(np.ones((1, 2)), np.ones(2), np.zeros(2), np.zeros(2), np.ones(2), True)


@pytest.mark.parametrize("train", [True, False])
@pytest.mark.parametrize("shape", [(5, 3), (4, 2, 6)])
def test_batchnorm_gradcheck(train, shape):
    rng = np.random.default_rng(4)
    x = rng.normal(size=shape)
    C = shape[1]
    gamma, beta = rng.normal(size=C), rng.normal(size=C)
    rm, rv = rng.normal(size=C), rng.random(C) + 0.5
    R = _loss_weights(shape)

    def loss():
        return float((batchnorm_forward(x, gamma, beta, rm, rv, train)[0] * R).sum())

    _, cache, _, _ = batchnorm_forward(x, gamma, beta, rm, rv, train)
    dx, dg, db = batchnorm_backward(R, cache)
    err = grad_check(loss, {"x": x, "gamma": gamma, "beta": beta}, {"x": dx, "gamma": dg, "beta": db})
    assert err < 1e-4


# ------------------------------------------------------------------- conv

def test_conv_identity_kernel():
    x = np.random.default_rng(0).normal(size=(2, 1, 5))
    y, _ = conv1d_causal_forward(x, np.ones((1, 1, 1)), np.zeros(1), 1)
    assert np.array_equal(y, x)


def test_conv_shift_kernel():
    x = np.array([[[1.0, 2.0, 3.0, 4.0]]])
    y, _ = conv1d_causal_forward(x, np.array([[[0.0, 1.0]]]), np.zeros(1), 1)
    assert np.array_equal(y, np.array([[[0.0, 1.0, 2.0, 3.0]]]))


def test_conv_dilated_shift():
    x = np.array([[[1.0, 2.0, 3.0, 4.0, 5.0]]])
    y, _ = conv1d_causal_forward(x, np.array([[[0.0, 1.0]]]), np.zeros(1), 2)
    assert np.array_equal(y, np.array([[[0.0, 0.0, 1.0, 2.0, 3.0]]]))


def test_conv_rejects_channel_mismatch():
    with pytest.raises(ShapeError):
        conv1d_causal_forward(np.ones((1, 2, 4)), np.ones((1, 3, 2)), np.zeros(1), 1)


@given(seed=st.integers(0, 10_000), k=st.integers(1, 4), d=st.integers(1, 4),
       t_prime=st.integers(0, 9))
@settings(max_examples=60, deadline=None)
def test_conv_causality(seed, k, d, t_prime):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 3, 10))
    W, b = rng.normal(size=(2, 3, k)), rng.normal(size=2)
    y1, _ = conv1d_causal_forward(x, W, b, d)
    x2 = x.copy()
    x2[:, :, t_prime] += rng.normal(size=(2, 3)) * 10
    y2, _ = conv1d_causal_forward(x2, W, b, d)
    assert np.array_equal(y1[:, :, :t_prime], y2[:, :, :t_prime])


@pytest.mark.parametrize("k,d", [(1, 1), (2, 1), (3, 2), (2, 4)])
def test_conv_gradcheck(k, d):
    rng = np.random.default_rng(5)
    x, W, b = rng.normal(size=(2, 3, 7)), rng.normal(size=(4, 3, k)), rng.normal(size=4)
    R = _loss_weights((2, 4, 7))

    def loss():
        return float((conv1d_causal_forward(x, W, b, d)[0] * R).sum())

    _, cache = conv1d_causal_forward(x, W, b, d)
    dx, dW, db = conv1d_causal_backward(R, cache)
    assert grad_check(loss, {"x": x, "W": W, "b": b}, {"x": dx, "W": dW, "b": db}) < 1e-6


# ------------------------------------------------------------------- lstm

def _layer(rng, F, H, scale=0.5):
    return {"W_ih": rng.normal(0, scale, (4 * H, F)), "W_hh": rng.normal(0, scale, (4 * H, H)),
            "b": rng.normal(0, scale, 4 * H)}


def test_lstm_zero_weights_zero_states():
    x = np.random.default_rng(0).normal(size=(3, 5, 2))
    layer = {"W_ih": np.zeros((8, 2)), "W_hh": np.zeros((8, 2)), "b": np.zeros(8)}
    hs, _ = lstm_forward(x, [layer])
    assert np.array_equal(hs, np.zeros((3, 5, 2)))


def test_lstm_scalar_single_step_matches_hand_recurrence():
    x = 0.7
    w_ih = np.array([0.5, -0.3, 0.8, 0.2])   # i, f, g, o
    b = np.array([0.1, 0.2, -0.1, 0.05])
    z = w_ih * x + b
    i, f, g, o = 1 / (1 + np.exp(-z[0])), 1 / (1 + np.exp(-z[1])), np.tanh(z[2]), 1 / (1 + np.exp(-z[3]))
    c = f * 0.0 + i * g
    expected = o * np.tanh(c)
    layer = {"W_ih": w_ih[:, None], "W_hh": np.array([[0.4], [0.4], [0.4], [0.4]]), "b": b}
    hs, _ = lstm_forward(np.array([[[x]]]), [layer])
    assert hs[0, 0, 0] == pytest.approx(expected, abs=1e-15)


def test_lstm_two_step_scalar_recurrence():
    w_ih = np.array([0.5, -0.3, 0.8, 0.2])
    w_hh = np.array([0.3, 0.1, -0.6, 0.9])
    b = np.array([0.1, 0.2, -0.1, 0.05])
    sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
    h, c = 0.0, 0.0
    xs = [0.7, -1.2]
    out = []
    for x in xs:
        z = w_ih * x + w_hh * h + b
        i, f, g, o = sig(z[0]), sig(z[1]), np.tanh(z[2]), sig(z[3])
        c = f * c + i * g
        h = o * np.tanh(c)
        out.append(h)
    layer = {"W_ih": w_ih[:, None], "W_hh": w_hh[:, None], "b": b}
    hs, _ = lstm_forward(np.array(xs).reshape(1, 2, 1), [layer])
    assert np.allclose(hs[0, :, 0], out, atol=1e-15)


def test_lstm_rejects_bad_input_width():
    layer = _layer(np.random.default_rng(0), 3, 2)
    with pytest.raises(ShapeError):
        lstm_forward(np.ones((1, 4, 2)), [layer])


@pytest.mark.parametrize("layers,dropout", [(1, 0.0), (2, 0.0), (2, 0.4), (3, 0.2)])
def test_lstm_gradcheck(layers, dropout):
    rng = np.random.default_rng(6)
    F, H = 3, 4
    params = [_layer(rng, F if i == 0 else H, H) for i in range(layers)]
    x = rng.normal(size=(2, 5, F))
    R = _loss_weights((2, 5, H))

    def run():
        return lstm_forward(x, params, dropout, np.random.default_rng(7), True)

    def loss():
        return float((run()[0] * R).sum())

    hs, caches = run()
    dx, grads = lstm_backward(R, caches)
    flat = {"x": x}
    analytic = {"x": dx}
    for i, (p, g) in enumerate(zip(params, grads)):
        for k in p:
            flat[f"{i}.{k}"] = p[k]
            analytic[f"{i}.{k}"] = g[k]
    assert grad_check(loss, flat, analytic) < 1e-4


# ------------------------------------------------------------------- init

def test_kaiming_std():
    w = init_kaiming_normal((1000, 1000), 50, 0)
    assert abs(w.std() - np.sqrt(2 / 50)) / np.sqrt(2 / 50) < 0.01


def test_uniform_lstm_range_and_determinism():
    a = init_uniform_lstm((4 * 16, 8), 16, 3)
    b = init_uniform_lstm((4 * 16, 8), 16, 3)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) <= 1 / np.sqrt(16))


def test_zero_bias_init():
    assert np.array_equal(zeros(5), np.zeros(5))


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([0.0])) == 0.0
    assert relative_error(np.array([1e-9]), np.array([0.0])) == pytest.approx(0.1)
