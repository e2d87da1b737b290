"""Probability averaging and logistic stacking."""

from __future__ import annotations

import numpy as np
from sklearn.base import clone
from sklearn.model_selection import StratifiedKFold

from ..bundle import take_rows
from ..exceptions import DataError
from ..tensorcore import sigmoid


def _stack_columns(prob_list) -> np.ndarray:
    arrays = [np.asarray(p, dtype=float).ravel() for p in prob_list]
    if len(arrays) < 2:
        raise DataError("an ensemble needs at least two models")
    if len({a.size for a in arrays}) != 1:
        raise DataError("probability vectors have different lengths")
    return np.column_stack(arrays)


def ensemble_average(prob_list) -> np.ndarray:
    return _stack_columns(prob_list).mean(axis=1)


class LogisticMeta:
    """Logistic regression by full-batch gradient descent with an L2 penalty on the weights."""

    def __init__(self, learning_rate=0.1, n_iter=1000, l2=1e-4):
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.l2 = l2

    def fit(self, Z, y):
        Z = np.asarray(Z, dtype=float)
        y = np.asarray(y, dtype=float)
        n, k = Z.shape
        self.coef_ = np.zeros(k)
        self.intercept_ = 0.0
        for _ in range(self.n_iter):
            r = sigmoid(Z @ self.coef_ + self.intercept_) - y
            self.coef_ -= self.learning_rate * (Z.T @ r / n + self.l2 * self.coef_)
            self.intercept_ -= self.learning_rate * r.mean()
        return self

    def predict_proba(self, Z):
        return sigmoid(np.asarray(Z, dtype=float) @ self.coef_ + self.intercept_)


def out_of_fold_probabilities(estimator, X, y, k: int = 5, seed=0) -> np.ndarray:
    """Probabilities for each training patient from a model that never saw them."""
    y = np.asarray(y).astype(int)
    out = np.empty(len(y))
    folds = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    for tr, va in folds.split(np.zeros(len(y)), y):
        model = clone(estimator).fit(take_rows(X, tr), y[tr])
        part = take_rows(X, va)
        out[va] = model.predict_proba(part)[:, 1]
    return out


def ensemble_stack(train_probs, y, test_probs, **meta_params):
    """Fit the meta-model on held-out base probabilities; returns ``(meta, test probabilities)``."""
    Ztr = _stack_columns(train_probs)
    Zte = _stack_columns(test_probs)
    if Ztr.shape[0] != len(y):
        raise DataError("train probabilities and labels differ in length")
    if Ztr.shape[1] != Zte.shape[1]:
        raise DataError("train and test hold different numbers of base models")
    meta = LogisticMeta(**meta_params).fit(Ztr, y)
    return meta, meta.predict_proba(Zte)
