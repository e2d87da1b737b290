import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extubate.bundle import TabularData
from extubate.evaluation import auc_roc
from extubate.exceptions import SchemaError
from extubate.models import GBDTClassifier
from extubate.models.gbdt import best_split, fit_tree, logistic_loss, split_gain, tree_depth


def brute_force_split(X, g, h, lam, min_data):
    """Enumerate every (feature, midpoint) directly with masked sums."""
    G, H = g.sum(), h.sum()
    best = None
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = (a + b) / 2
            left = X[:, j] <= thr
            if left.sum() < min_data or (~left).sum() < min_data:
                continue
            GL, HL = g[left].sum(), h[left].sum()
            gain = 0.5 * (GL ** 2 / (HL + lam) + (G - GL) ** 2 / (H - HL + lam) - G ** 2 / (H + lam))
            if best is None or gain > best[0] + 1e-9:
                best = (gain, j, thr)
    return best


@given(seed=st.integers(0, 100_000), n=st.integers(4, 200), d=st.integers(1, 5),
       min_data=st.integers(1, 5), discrete=st.booleans())
@settings(max_examples=80, deadline=None)
def test_split_matches_brute_force(seed, n, d, min_data, discrete):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(n, d)).astype(float) if discrete else rng.normal(size=(n, d))
    p = rng.random(n)
    y = (rng.random(n) < 0.4).astype(float)
    g, h = p - y, p * (1 - p)
    ours = best_split(X, g, h, np.arange(n), 1.0, min_data)
    oracle = brute_force_split(X, g, h, 1.0, min_data)
    if oracle is None:
        assert ours is None
        return
    assert ours[0] == pytest.approx(oracle[0], rel=1e-9, abs=1e-12)
    assert (ours[1], ours[2]) == (oracle[1], pytest.approx(oracle[2]))


def test_split_gain_formula():
    assert split_gain(1.0, 1.0, -1.0, 1.0, 0.0) == pytest.approx(0.5 * (1 + 1 - 0))


def test_tie_break_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    g = np.array([1.0, -1.0, 1.0, -1.0])
    h = np.ones(4)
    _, j, thr = best_split(X, g, h, np.arange(4), 1.0, 1)
    assert (j, thr) == (0, 0.5)


def test_separable_reaches_auc_one_within_ten_rounds():
    x = np.linspace(0, 1, 60)[:, None]
    y = (x[:, 0] > 0.5).astype(int)
    m = GBDTClassifier(n_rounds=10, min_data_in_leaf=2, num_leaves=4, validation_fraction=0)
    m.fit(x, y)
    assert auc_roc(m.predict_proba(x)[:, 1], y) == 1.0


def test_single_class_gives_prevalence():
    X = np.random.default_rng(0).normal(size=(10, 2))
    with pytest.warns(UserWarning, match="single-class"):
        m = GBDTClassifier().fit(X, np.zeros(10, dtype=int))
    assert np.all(m.predict_proba(X)[:, 1] == 0.0)
    assert m.trees_ == []


def test_min_data_larger_than_n_gives_base_only():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 2))
    y = np.r_[np.ones(10), np.zeros(20)].astype(int)
    m = GBDTClassifier(min_data_in_leaf=31, validation_fraction=0).fit(X, y)
    assert m.trees_ == []
    assert np.allclose(m.predict_proba(X)[:, 1], 1 / 3, atol=1e-15)


def test_width_mismatch_rejected():
    X = np.random.default_rng(0).normal(size=(20, 3))
    y = np.r_[np.ones(10), np.zeros(10)].astype(int)
    m = GBDTClassifier(min_data_in_leaf=2, validation_fraction=0).fit(X, y)
    with pytest.raises(SchemaError):
        m.predict_proba(X[:, :2])


def test_training_loss_never_increases():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 4))
    y = (X[:, 0] + 0.5 * rng.normal(size=200) > 0).astype(int)
    m = GBDTClassifier(n_rounds=30, min_data_in_leaf=5, validation_fraction=0).fit(X, y)
    losses = [logistic_loss(y, np.full(200, m.base_score_))] + [r["train_loss"] for r in m.history_]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


@pytest.mark.parametrize("seed", [3, 7, 11])
def test_monotone_in_single_predictive_feature(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, 1000)
    y = (rng.random(1000) < 1 / (1 + np.exp(-12 * (x - 0.5)))).astype(int)
    m = GBDTClassifier(n_rounds=30, min_data_in_leaf=50, num_leaves=2, validation_fraction=0)
    m.fit(x[:, None], y)
    sweep = np.linspace(x.min(), x.max(), 400)[:, None]
    p = m.predict_proba(sweep)[:, 1]
    assert p[-1] > p[0]
    assert np.all(np.diff(p) >= 0)


def test_depth_and_leaf_limits_respected():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(300, 3))
    y = (X.sum(axis=1) > 0).astype(int)
    m = GBDTClassifier(num_leaves=5, max_depth=2, min_data_in_leaf=3, n_rounds=5,
                       validation_fraction=0).fit(X, y)
    for tree in m.trees_:
        assert tree_depth(tree) <= 2
        assert sum("leaf" in n for n in tree) <= 5
        assert all(np.isfinite(n["leaf"]) for n in tree if "leaf" in n)


def test_fit_tree_leaf_weight():
    X = np.array([[0.0], [1.0]])
    g, h = np.array([0.5, -0.5]), np.array([0.25, 0.25])
    nodes = fit_tree(X, g, h, num_leaves=2, max_depth=None, min_data=1, lam=1.0)
    leaves = sorted(n["leaf"] for n in nodes if "leaf" in n)
    assert leaves == pytest.approx([-0.5 / 1.25, 0.5 / 1.25])


def test_deterministic_and_serialisable():
    rng = np.random.default_rng(5)
    X = TabularData(rng.normal(size=(100, 3)), ["a", "b", "c"])
    y = (X.X[:, 1] > 0).astype(int)
    m = GBDTClassifier(min_data_in_leaf=5).fit(X, y)
    again = GBDTClassifier.from_dict(json.loads(json.dumps(m.to_dict())))
    assert np.array_equal(again.predict_proba(X), m.predict_proba(X))
    assert np.array_equal(m.predict_proba(X), m.predict_proba(X))


def test_early_stopping_truncates_to_best_round():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(300, 5))
    y = (rng.random(300) < 0.4).astype(int)   # pure noise: validation AUC stalls early
    m = GBDTClassifier(n_rounds=200, min_data_in_leaf=5).fit(X, y)
    aucs = [r["val_auc"] for r in m.history_]
    assert len(m.history_) < 200
    assert len(m.trees_) == int(np.argmax(aucs)) + 1
