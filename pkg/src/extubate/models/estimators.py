"""Fused LSTM and Fused TCN classifiers with an sklearn-style interface."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_is_fitted

from ..bundle import SUBSETS
from ..exceptions import SchemaError
from ..tensorcore import sigmoid
from ..training.loop import train_network
from ..training.losses import class_weights
from ..training.sampling import resample_training
from .network import FusedNetwork, FusedSpec
from .validation import check_bundle, check_labels


def carve_validation(n: int, y, fraction: float, seed):
    """Stratified train/validation index split; stratification is dropped when a class is tiny."""
    idx = np.arange(n)
    n_val = int(round(fraction * n))
    if fraction <= 0 or n_val < 2 or n - n_val < 2:
        return idx, idx[:0]
    strat = y if np.bincount(y, minlength=2).min() >= 2 else None
    tr, va = train_test_split(idx, test_size=n_val, random_state=seed, stratify=strat)
    return np.sort(tr), np.sort(va)


class _FusedClassifier(ClassifierMixin, BaseEstimator):
    _family = ""

    def _spec(self, X) -> FusedSpec:
        raise NotImplementedError

    def _common_spec(self, X):
        static_dim = 0
        if self.use_static:
            if X.static is None or X.static.shape[1] == 0:
                raise SchemaError("use_static=True but the bundle has no static matrix")
            static_dim = X.static.shape[1]
        return dict(
            family=self._family,
            branch_features=tuple(len(X.subsets[s].features) for s in SUBSETS),
            branch_steps=tuple(X.subsets[s].n_steps for s in SUBSETS),
            hidden_dim=self.hidden_dim, dropout_prob=self.dropout_prob, static_dim=static_dim,
            ffnn_layers=self.ffnn_layers, ffnn_units=self.ffnn_units,
            ffnn_activation=self.ffnn_activation, ffnn_dropout=self.ffnn_dropout)

    def fit(self, X, y, validation=None):
        """Train on a bundle.

        Parameters
        ----------
        X : SubsetTensorBundle
        y : array of 0/1 labels
        validation : (bundle, labels) or None
            Early-stopping data. Without it ``validation_fraction`` of the
            training patients is held out for the purpose.
        """
        X = check_bundle(X)
        y = check_labels(y, len(X))
        seed = self.random_state
        if validation is None:
            tr, va = carve_validation(len(X), y, self.validation_fraction, seed)
            val_X = X.take(va).with_provenance("validation") if va.size else None
            val_y = y[va]
            X, y = X.take(tr), y[tr]
        else:
            val_X = check_bundle(validation[0]).with_provenance("validation")
            val_y = check_labels(validation[1], len(val_X))
        self.spec_ = self._spec(X)
        self.feature_order_ = X.feature_order
        Xr, yr = resample_training(X, y, self.sampling_method, seed)
        weights = None
        if self.loss == "weighted":
            if self.sampling_method == "normal":
                weights = class_weights(yr)
            else:
                warnings.warn("weighted loss is redundant with resampling and is ignored",
                              UserWarning, stacklevel=2)
        elif self.loss != "normal":
            raise ValueError(f"loss must be 'normal' or 'weighted', got {self.loss!r}")
        rng = np.random.default_rng(seed)
        self.network_ = FusedNetwork(self.spec_, seed=rng)
        if not self.use_static:
            Xr = Xr.without_static()
            val_X = None if val_X is None else val_X.without_static()
        self.history_ = train_network(
            self.network_, Xr, yr, learning_rate=self.learning_rate, batch_size=self.batch_size,
            num_epochs=self.num_epochs, weight_decay=self.weight_decay, sample_weight=weights,
            grad_clip=self._grad_clip(), val_bundle=val_X, val_y=val_y,
            patience=self.patience, min_delta=self.min_delta, rng=rng)
        self.classes_ = np.array([0, 1])
        return self

    def _grad_clip(self):
        return None

    def _check_order(self, X):
        order = X.feature_order
        for key in (*SUBSETS, *(("static",) if self.spec_.static_dim else ())):
            if order[key] != self.feature_order_[key]:
                raise SchemaError(f"{key} feature order differs from training: "
                                  f"{order[key]} vs {self.feature_order_[key]}")

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        X = check_bundle(X)
        self._check_order(X)
        return self.network_.predict_logits(X)

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold: float = 0.5):
        """Label 1 iff the failure probability is strictly above ``threshold``."""
        return (self.predict_proba(X)[:, 1] > threshold).astype(int)


class FusedLSTMClassifier(_FusedClassifier):
    """Three LSTM branches (low/medium/high frequency) fused by one linear layer.

    All branches share ``hidden_dim``, ``layer_dim`` and ``dropout_prob``.
    """

    _family = "lstm"

    def __init__(self, hidden_dim=32, layer_dim=1, dropout_prob=0.0, learning_rate=1e-3,
                 batch_size=32, num_epochs=20, weight_decay=0.0, sampling_method="normal",
                 loss="normal", use_static=False, ffnn_layers=1, ffnn_units=32,
                 ffnn_activation="relu", ffnn_dropout=0.0, patience=5, min_delta=0.0,
                 validation_fraction=0.1, random_state=0):
        self.hidden_dim = hidden_dim
        self.layer_dim = layer_dim
        self.dropout_prob = dropout_prob
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.num_epochs = num_epochs
        self.weight_decay = weight_decay
        self.sampling_method = sampling_method
        self.loss = loss
        self.use_static = use_static
        self.ffnn_layers = ffnn_layers
        self.ffnn_units = ffnn_units
        self.ffnn_activation = ffnn_activation
        self.ffnn_dropout = ffnn_dropout
        self.patience = patience
        self.min_delta = min_delta
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _spec(self, X):
        return FusedSpec(layer_dim=self.layer_dim, **self._common_spec(X))


class FusedTCNClassifier(_FusedClassifier):
    """Three temporal-convolution branches fused by one linear layer.

    Block ``i`` uses dilation ``2**i`` and ``num_channels[i]`` channels; each
    branch ends in a 1x1 projection to ``hidden_dim``. Gradients are clipped
    to a global norm of ``grad_clip``.
    """

    _family = "tcn"

    def __init__(self, num_channels=(16, 32), kernel_size=3, hidden_dim=32, dropout_prob=0.0,
                 learning_rate=1e-3, batch_size=32, num_epochs=20, weight_decay=0.0,
                 sampling_method="normal", loss="normal", use_static=False, ffnn_layers=1,
                 ffnn_units=32, ffnn_activation="relu", ffnn_dropout=0.0, grad_clip=1.0,
                 patience=5, min_delta=0.0, validation_fraction=0.1, random_state=0):
        self.num_channels = num_channels
        self.kernel_size = kernel_size
        self.hidden_dim = hidden_dim
        self.dropout_prob = dropout_prob
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.num_epochs = num_epochs
        self.weight_decay = weight_decay
        self.sampling_method = sampling_method
        self.loss = loss
        self.use_static = use_static
        self.ffnn_layers = ffnn_layers
        self.ffnn_units = ffnn_units
        self.ffnn_activation = ffnn_activation
        self.ffnn_dropout = ffnn_dropout
        self.grad_clip = grad_clip
        self.patience = patience
        self.min_delta = min_delta
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _spec(self, X):
        return FusedSpec(num_channels=tuple(self.num_channels), kernel_size=self.kernel_size,
                         **self._common_spec(X))

    def _grad_clip(self):
        return self.grad_clip
