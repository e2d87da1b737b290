"""Gradient-boosted regression trees on logistic loss (exact greedy, leaf-wise growth)."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..bundle import TabularData
from ..evaluation.metrics import auc_roc
from ..tensorcore import sigmoid
from ..training.sampling import resample_training
from .estimators import carve_validation
from .validation import check_labels, check_matrix

_TIE = 1e-12


def split_gain(GL, HL, GR, HR, lam):
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam))


def best_split(X, g, h, rows, lam, min_data):
    """Best (gain, feature, threshold) over all features for the given rows, or None.

    Candidates sit at midpoints between consecutive distinct values and send
    ``x <= threshold`` left. Ties go to the lowest feature, then the lowest
    threshold.
    """
    best = None
    G, H = g[rows].sum(), h[rows].sum()
    n = rows.size
    if n < 2 * min_data:
        return None
    for j in range(X.shape[1]):
        xs = X[rows, j]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        GL = np.cumsum(g[rows][order])[:-1]
        HL = np.cumsum(h[rows][order])[:-1]
        left_n = np.arange(1, n)
        ok = (xs[1:] > xs[:-1]) & (left_n >= min_data) & (n - left_n >= min_data)
        if not ok.any():
            continue
        gains = split_gain(GL, HL, G - GL, H - HL, lam)
        gains = np.where(ok, gains, -np.inf)
        i = int(np.argmax(gains))
        top = gains[i]
        # earliest position within tolerance of the maximum is the lowest threshold
        i = int(np.nonzero(gains >= top - _TIE * max(1.0, abs(top)))[0][0])
        gain = gains[i]
        if best is None or gain > best[0] + _TIE * max(1.0, abs(best[0])):
            best = (float(gain), j, float((xs[i] + xs[i + 1]) / 2.0))
    return best


def fit_tree(X, g, h, num_leaves, max_depth, min_data, lam):
    """Grow one tree leaf-wise; returns a flat node list."""
    nodes = [{"leaf": 0.0, "depth": 0}]
    leaf_rows = {0: np.arange(X.shape[0])}
    candidates = {}

    def consider(node_id):
        depth = nodes[node_id]["depth"]
        if max_depth is not None and max_depth > 0 and depth >= max_depth:
            return
        s = best_split(X, g, h, leaf_rows[node_id], lam, min_data)
        if s is not None and s[0] > 0:
            candidates[node_id] = s

    consider(0)
    n_leaves = 1
    while n_leaves < num_leaves and candidates:
        # largest gain first; equal gains go to the oldest leaf
        node_id = max(candidates, key=lambda k: (candidates[k][0], -k))
        gain, j, thr = candidates.pop(node_id)
        rows = leaf_rows.pop(node_id)
        left = rows[X[rows, j] <= thr]
        right = rows[X[rows, j] > thr]
        depth = nodes[node_id]["depth"]
        li, ri = len(nodes), len(nodes) + 1
        nodes.append({"leaf": 0.0, "depth": depth + 1})
        nodes.append({"leaf": 0.0, "depth": depth + 1})
        nodes[node_id] = {"feature": j, "threshold": thr, "left": li, "right": ri,
                          "gain": gain, "depth": depth}
        leaf_rows[li], leaf_rows[ri] = left, right
        n_leaves += 1
        consider(li)
        consider(ri)
    for node_id, rows in leaf_rows.items():
        w = -g[rows].sum() / (h[rows].sum() + lam)
        nodes[node_id]["leaf"] = float(w)
    return nodes


def predict_tree(nodes, X):
    out = np.empty(X.shape[0])
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        node_id, rows = stack.pop()
        node = nodes[node_id]
        if "leaf" in node:
            out[rows] = node["leaf"]
            continue
        go_left = X[rows, node["feature"]] <= node["threshold"]
        stack.append((node["left"], rows[go_left]))
        stack.append((node["right"], rows[~go_left]))
    return out


def tree_depth(nodes, node_id=0) -> int:
    node = nodes[node_id]
    if "leaf" in node:
        return 0
    return 1 + max(tree_depth(nodes, node["left"]), tree_depth(nodes, node["right"]))


def logistic_loss(y, f) -> float:
    return float(np.mean(np.logaddexp(0.0, f) - y * f))


class GBDTClassifier(ClassifierMixin, BaseEstimator):
    """Boosted trees for the aggregated tabular baseline.

    Each round fits a tree to the logistic-loss gradients and hessians with
    leaf weights ``-G / (H + l2_lambda)``. Training stops once validation
    AUC has not improved for ``early_stopping_rounds`` rounds and the model
    is truncated to its best round.
    """

    def __init__(self, num_leaves=31, max_depth=-1, min_data_in_leaf=20, learning_rate=0.1,
                 l2_lambda=1.0, n_rounds=100, early_stopping_rounds=10,
                 sampling_method="normal", validation_fraction=0.1, random_state=0):
        self.num_leaves = num_leaves
        self.max_depth = max_depth
        self.min_data_in_leaf = min_data_in_leaf
        self.learning_rate = learning_rate
        self.l2_lambda = l2_lambda
        self.n_rounds = n_rounds
        self.early_stopping_rounds = early_stopping_rounds
        self.sampling_method = sampling_method
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _check_params(self):
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be at least 2")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def fit(self, X, y, validation=None):
        self._check_params()
        names = X.feature_names if isinstance(X, TabularData) else None
        Xa = check_matrix(X)
        y = check_labels(y, Xa.shape[0])
        if validation is None:
            tr, va = carve_validation(len(y), y, self.validation_fraction, self.random_state)
            Xv, yv = Xa[va], y[va]
            Xa, y = Xa[tr], y[tr]
        else:
            Xv = check_matrix(validation[0], Xa.shape[1])
            yv = check_labels(validation[1], Xv.shape[0])
        self.n_features_in_ = Xa.shape[1]
        self.feature_names_ = names
        self.classes_ = np.array([0, 1])
        self.trees_ = []
        self.history_ = []
        if y.min() == y.max():
            warnings.warn("single-class training labels; fitting the base score only",
                          UserWarning, stacklevel=2)
            self.prevalence_ = float(y[0])
            self.base_score_ = float(np.log(np.clip(self.prevalence_, 1e-12, 1 - 1e-12)
                                            / np.clip(1 - self.prevalence_, 1e-12, 1)))
            return self
        Xa, y = resample_training(Xa, y, self.sampling_method, self.random_state)
        self.prevalence_ = float(y.mean())
        self.base_score_ = float(np.log(self.prevalence_ / (1.0 - self.prevalence_)))
        yf = y.astype(float)
        f = np.full(y.size, self.base_score_)
        fv = np.full(yv.size, self.base_score_)
        use_val = yv.size > 0 and 0 < yv.sum() < yv.size
        best_auc, best_round, stale = -np.inf, 0, 0
        max_depth = None if self.max_depth is None or self.max_depth <= 0 else self.max_depth
        for r in range(self.n_rounds):
            p = sigmoid(f)
            g, h = p - yf, p * (1.0 - p)
            nodes = fit_tree(Xa, g, h, self.num_leaves, max_depth, self.min_data_in_leaf,
                             self.l2_lambda)
            if len(nodes) == 1:
                break
            self.trees_.append(nodes)
            f = f + self.learning_rate * predict_tree(nodes, Xa)
            row = {"round": r + 1, "train_loss": logistic_loss(yf, f), "val_auc": None}
            if use_val:
                fv = fv + self.learning_rate * predict_tree(nodes, Xv)
                row["val_auc"] = auc_roc(fv, yv)
                if row["val_auc"] > best_auc:
                    best_auc, best_round, stale = row["val_auc"], r + 1, 0
                else:
                    stale += 1
            self.history_.append(row)
            if use_val and stale >= self.early_stopping_rounds:
                break
        if use_val and best_round:
            self.trees_ = self.trees_[:best_round]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "trees_")
        Xa = check_matrix(X, self.n_features_in_)
        f = np.full(Xa.shape[0], self.base_score_)
        for nodes in self.trees_:
            f += self.learning_rate * predict_tree(nodes, Xa)
        return f

    def predict_proba(self, X):
        if not self.trees_:
            check_matrix(X, self.n_features_in_)
            p = np.full(np.asarray(X).shape[0], self.prevalence_)
        else:
            p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold: float = 0.5):
        return (self.predict_proba(X)[:, 1] > threshold).astype(int)

    def to_dict(self) -> dict:
        check_is_fitted(self, "trees_")
        return {"params": self.get_params(), "base_score": self.base_score_,
                "prevalence": self.prevalence_, "n_features": self.n_features_in_,
                "feature_names": self.feature_names_, "trees": self.trees_}

    @classmethod
    def from_dict(cls, d: dict) -> "GBDTClassifier":
        model = cls(**d["params"])
        model.base_score_ = d["base_score"]
        model.prevalence_ = d["prevalence"]
        model.n_features_in_ = d["n_features"]
        model.feature_names_ = d["feature_names"]
        model.trees_ = d["trees"]
        model.classes_ = np.array([0, 1])
        model.history_ = []
        return model
