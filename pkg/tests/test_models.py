import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from conftest import random_bundle
from extubate.bundle import SubsetTensor, SubsetTensorBundle
from extubate.exceptions import SchemaError, ShapeError
from extubate.models import (
    FusedLSTMClassifier,
    FusedNetwork,
    FusedSpec,
    FusedTCNClassifier,
    fused_forward,
    last_valid_output,
    split_inputs,
)
from extubate.tensorcore import grad_check


def _spec(family, features=(2, 1, 3), **kw):
    base = dict(hidden_dim=4, layer_dim=2, num_channels=(3, 4), kernel_size=2)
    base.update(kw)
    return FusedSpec(family, features, **base)


def _remask(bundle, rng):
    """Copy of ``bundle`` with arbitrary finite numbers written under the mask, then re-NaN'd."""
    subsets = {}
    for name, sub in bundle.subsets.items():
        v = sub.values.copy()
        v[~sub.mask] = rng.normal(0, 100, size=(~sub.mask).sum())
        v = np.where(sub.mask, v, np.nan)
        subsets[name] = SubsetTensor(v, sub.mask.copy(), sub.features, sub.interval)
    return SubsetTensorBundle(bundle.patient_ids, subsets, bundle.static, bundle.static_features)


# ------------------------------------------------------- last_valid_output

@pytest.mark.parametrize("mask,expected", [
    ([True, True, False], 1),
    ([True, True, True], 2),
    ([False, True, False], 1),
])
def test_last_valid_index(mask, expected):
    out = np.arange(6.0).reshape(1, 3, 2)
    picked, last = last_valid_output(out, np.array([mask]))
    assert last[0] == expected
    assert np.array_equal(picked[0], out[0, expected])


def test_last_valid_all_false_is_zero():
    out = np.ones((1, 3, 2))
    picked, last = last_valid_output(out, np.zeros((1, 3), dtype=bool))
    assert last[0] == -1
    assert np.array_equal(picked, np.zeros((1, 2)))


# ------------------------------------------------------------ fused model

@pytest.mark.parametrize("family", ["lstm", "tcn"])
def test_all_masked_patient_gives_half(family):
    rng = np.random.default_rng(0)
    bundle = random_bundle(rng, n=3)
    for sub in bundle.subsets.values():
        sub.mask[1] = False
        sub.values[1] = np.nan
    net = FusedNetwork(_spec(family), seed=1)
    assert fused_forward(net, bundle)[1] == 0.5


@pytest.mark.parametrize("family", ["lstm", "tcn"])
def test_masking_invariance(family):
    rng = np.random.default_rng(1)
    bundle = random_bundle(rng, n=5, static_dim=2)
    net = FusedNetwork(_spec(family, static_dim=2), seed=2)
    base = fused_forward(net, bundle)
    for _ in range(20):
        assert np.array_equal(fused_forward(net, _remask(bundle, rng)), base)


def test_nan_under_observed_mask_rejected():
    bundle = random_bundle(np.random.default_rng(2), n=3)
    bundle.subsets["high"].values[2, 0, 0] = np.nan
    bundle.subsets["high"].mask[2, 0, 0] = True
    with pytest.raises(SchemaError):
        split_inputs(bundle)


def test_branch_shape_mismatch_rejected():
    bundle = random_bundle(np.random.default_rng(2), n=3)
    net = FusedNetwork(_spec("lstm", features=(2, 1, 4)), seed=0)
    with pytest.raises(ShapeError):
        fused_forward(net, bundle)


@pytest.mark.parametrize("family", ["lstm", "tcn"])
def test_branch_separability(family):
    rng = np.random.default_rng(3)
    bundle = random_bundle(rng, n=4)
    spec = _spec(family)
    net = FusedNetwork(spec, seed=3)
    H = spec.hidden_dim
    net.params["fuse.W"][:, H:2 * H] = 0.0   # medium branch
    base = fused_forward(net, bundle)
    sub = bundle.subsets["medium"]
    other = rng.random(sub.values.shape)
    mask = rng.random(sub.mask.shape) < 0.5
    bundle.subsets["medium"] = SubsetTensor(np.where(mask, other, np.nan), mask, sub.features,
                                            sub.interval)
    assert np.array_equal(fused_forward(net, bundle), base)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_tcn_causality_after_last_valid_step(seed):
    rng = np.random.default_rng(seed)
    bundle = random_bundle(rng, n=3, p_missing=0.0, empty_rows=False)
    sub = bundle.subsets["high"]
    cut = int(rng.integers(1, sub.n_steps))
    sub.mask[:, cut:, :] = False
    sub.values[:, cut:, :] = np.nan
    net = FusedNetwork(_spec("tcn"), seed=seed)
    for name in ("low", "medium", "high"):
        x, m = split_inputs(bundle)[("low", "medium", "high").index(name)]
        hs, _ = net.branch_outputs(name, x)
        x2 = x.copy()
        t2 = int(rng.integers(0, x.shape[1]))
        x2[:, t2:, :] += rng.normal(size=x2[:, t2:, :].shape)
        hs2, _ = net.branch_outputs(name, x2)
        assert np.array_equal(hs[:, :t2], hs2[:, :t2])
    base = fused_forward(net, bundle)
    bundle2 = _remask(bundle, rng)
    assert np.array_equal(fused_forward(net, bundle2), base)


def test_probabilities_strictly_inside_unit_interval():
    bundle = random_bundle(np.random.default_rng(4), n=8)
    for family in ("lstm", "tcn"):
        p = fused_forward(FusedNetwork(_spec(family), seed=5), bundle)
        assert np.all((p > 0) & (p < 1))


def _scalar_oracle_lstm(x_seq, mask_seq, w):
    """Single-unit LSTM over one feature, last valid hidden state (0 if none)."""
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))  # noqa: E731
    h = c = 0.0
    last = 0.0
    for x, m in zip(x_seq, mask_seq):
        x = x if m else 0.0
        z = [w["ih"][k] * x + w["hh"][k] * h + w["b"][k] for k in range(4)]
        i, f, g, o = sig(z[0]), sig(z[1]), math.tanh(z[2]), sig(z[3])
        c = f * c + i * g
        h = o * math.tanh(c)
        if m:
            last = h
    return last


def test_fused_lstm_matches_scalar_hand_computation():
    rng = np.random.default_rng(6)
    spec = FusedSpec("lstm", (1, 1, 1), hidden_dim=1, layer_dim=1)
    net = FusedNetwork(spec, seed=0)
    weights = {}
    for name in ("low", "medium", "high"):
        w = {"ih": rng.normal(size=4), "hh": rng.normal(size=4), "b": rng.normal(size=4)}
        weights[name] = w
        net.params[f"{name}.lstm0.W_ih"] = w["ih"][:, None].copy()
        net.params[f"{name}.lstm0.W_hh"] = w["hh"][:, None].copy()
        net.params[f"{name}.lstm0.b"] = w["b"].copy()
    fuse_w = np.array([0.7, -1.1, 0.4])
    net.params["fuse.W"] = fuse_w[None, :].copy()
    net.params["fuse.b"] = np.array([0.2])
    bundle = random_bundle(rng, n=2, features=(1, 1, 1), empty_rows=False, p_missing=0.0)
    bundle.subsets["medium"].mask[1, 3:] = False
    bundle.subsets["medium"].values[1, 3:] = np.nan
    bundle.subsets["low"].mask[0] = False
    bundle.subsets["low"].values[0] = np.nan
    probs = fused_forward(net, bundle)
    for p in range(2):
        z = 0.2
        for k, name in enumerate(("low", "medium", "high")):
            sub = bundle.subsets[name]
            h = _scalar_oracle_lstm(np.nan_to_num(sub.values[p, :, 0]), sub.mask[p, :, 0],
                                    weights[name])
            z += fuse_w[k] * h
        assert probs[p] == pytest.approx(1 / (1 + math.exp(-z)), abs=1e-14)


def test_temporal_block_identity_convs():
    spec = FusedSpec("tcn", (1, 1, 1), hidden_dim=1, num_channels=(1,), kernel_size=2)
    net = FusedNetwork(spec, seed=0)
    pre = "high.block0"
    for conv in ("conv1", "conv2"):
        net.params[f"{pre}.{conv}.W"] = np.array([[[1.0, 0.0]]])   # tap 0 reads x[t]
        net.params[f"{pre}.{conv}.b"] = np.zeros(1)
    x = np.array([[[1.0, -2.0, 3.0]]])
    y, _ = net.temporal_block_forward(pre, x, 1, False, None, {})
    s2 = 1.0 + 1e-5
    expected = np.array([1.0 / s2 + 1.0, -2.0, 3.0 / s2 + 3.0])
    assert np.allclose(y[0, 0], expected, atol=1e-15)


def test_temporal_block_downsample_when_channels_differ():
    spec = FusedSpec("tcn", (2, 2, 2), hidden_dim=2, num_channels=(3,), kernel_size=2)
    net = FusedNetwork(spec, seed=0)
    assert net.params["low.block0.down.W"].shape == (3, 2, 1)
    same = FusedNetwork(FusedSpec("tcn", (3, 3, 3), hidden_dim=2, num_channels=(3,)), seed=0)
    assert "low.block0.down.W" not in same.params


def test_ffnn_zero_weights_give_zero_static_vector():
    spec = FusedSpec("lstm", (1, 1, 1), hidden_dim=2, static_dim=3, ffnn_layers=1, ffnn_units=4)
    net = FusedNetwork(spec, seed=0)
    for k in list(net.params):
        if k.startswith("static."):
            net.params[k] = np.zeros_like(net.params[k])
    bundle = random_bundle(np.random.default_rng(0), n=2, features=(1, 1, 1), static_dim=3)
    z1 = net.predict_logits(bundle)
    net.params["fuse.W"][:, 6:] = 123.0   # static slot weights are irrelevant when it is 0
    assert np.array_equal(net.predict_logits(bundle), z1)


def test_ffnn_dropout_zero_train_equals_eval():
    spec = FusedSpec("lstm", (1, 1, 1), hidden_dim=2, static_dim=3, ffnn_dropout=0.0)
    net = FusedNetwork(spec, seed=0)
    bundle = random_bundle(np.random.default_rng(0), n=4, features=(1, 1, 1), static_dim=3)
    train = fused_forward(net, bundle, train=True, rng=np.random.default_rng(0))
    assert np.allclose(train, fused_forward(net, bundle), atol=1e-15)


@pytest.mark.parametrize("family", ["lstm", "tcn"])
@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid", "leaky_relu"])
def test_fused_gradcheck(family, activation):
    rng = np.random.default_rng(7)
    bundle = random_bundle(rng, n=4, features=(2, 0, 3), static_dim=2)
    spec = _spec(family, features=(2, 0, 3), static_dim=2, ffnn_layers=2, ffnn_units=3,
                 ffnn_activation=activation, dropout_prob=0.2, ffnn_dropout=0.1)
    net = FusedNetwork(spec, seed=8)
    # zero-initialised biases on all-zero (masked) steps would put relu exactly on its kink
    for k in net.params:
        if k.endswith(".b"):
            net.params[k] = rng.normal(0, 0.3, size=net.params[k].shape)
    inputs = split_inputs(bundle)
    # small loss scale keeps finite-difference round-off on exactly-zero gradient
    # entries (bias shifts cancelled by batch norm) under the 1e-8 error floor
    R = 1e-2 * rng.normal(size=4)

    def loss():
        logits, _ = net.forward(inputs, bundle.static, train=True, rng=np.random.default_rng(9))
        return float(logits @ R)

    buffers = {k: v.copy() for k, v in net.buffers.items()}
    logits, cache = net.forward(inputs, bundle.static, train=True, rng=np.random.default_rng(9))
    net.buffers = buffers
    grads = net.backward(R, cache)
    assert set(grads) == set(net.params)

    err = grad_check(lambda: (loss(), net.buffers.update(buffers))[0], net.params, grads)
    assert err < 1e-4


# -------------------------------------------------------------- estimators

@pytest.mark.parametrize("cls", [FusedLSTMClassifier, FusedTCNClassifier])
def test_estimator_api(cls, small_prepared):
    d = small_prepared
    est = cls(hidden_dim=4, num_epochs=2, random_state=0)
    assert clone(est).get_params() == est.get_params()
    est.fit(d.train, d.y_train)
    proba = est.predict_proba(d.test)
    assert proba.shape == (len(d.test), 2)
    assert np.allclose(proba.sum(axis=1), 1.0)
    assert set(np.unique(est.predict(d.test))) <= {0, 1}
    assert 1 <= len(est.history_) <= 2


def test_predict_threshold_is_strict(small_prepared):
    d = small_prepared
    est = FusedLSTMClassifier(hidden_dim=2, num_epochs=1).fit(d.train, d.y_train)
    p = est.predict_proba(d.test)[:, 1]
    assert np.array_equal(est.predict(d.test, threshold=float(p[0]))[0:1], [0])
    assert np.all(est.predict(d.test, threshold=0.0) == 1)


def test_same_seed_same_parameters(small_prepared):
    d = small_prepared
    a = FusedTCNClassifier(num_channels=(4,), hidden_dim=3, num_epochs=2, random_state=5)
    b = clone(a)
    a.fit(d.train, d.y_train)
    b.fit(d.train, d.y_train)
    for k in a.network_.params:
        assert np.array_equal(a.network_.params[k], b.network_.params[k])


def test_feature_order_mismatch_rejected(small_prepared):
    d = small_prepared
    est = FusedLSTMClassifier(hidden_dim=2, num_epochs=1).fit(d.train, d.y_train)
    sub = d.test.subsets["medium"]
    swapped = SubsetTensor(sub.values[:, :, ::-1], sub.mask[:, :, ::-1], sub.features[::-1],
                           sub.interval)
    bad = SubsetTensorBundle(d.test.patient_ids, dict(d.test.subsets, medium=swapped))
    with pytest.raises(SchemaError):
        est.predict_proba(bad)


def test_use_static_requires_static_matrix(small_prepared):
    d = small_prepared
    with pytest.raises(SchemaError):
        FusedLSTMClassifier(use_static=True, num_epochs=1).fit(d.train.without_static(), d.y_train)


def test_weighted_loss_with_resampling_warns(small_prepared):
    d = small_prepared
    est = FusedLSTMClassifier(hidden_dim=2, num_epochs=1, loss="weighted",
                              sampling_method="undersample")
    with pytest.warns(UserWarning, match="redundant"):
        est.fit(d.train, d.y_train)
