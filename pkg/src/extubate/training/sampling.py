"""Class-imbalance handling applied to training data only."""

from __future__ import annotations

import numpy as np
from sklearn.neighbors import NearestNeighbors

from ..bundle import SubsetTensorBundle, TabularData
from ..exceptions import DataError

SAMPLING_METHODS = ("normal", "undersample", "oversample")


def _check_provenance(X):
    tag = getattr(X, "provenance", None)
    if tag in ("validation", "test"):
        raise DataError(f"refusing to resample {tag} data")


def _classes(y):
    y = np.asarray(y).astype(int)
    pos = np.nonzero(y == 1)[0]
    neg = np.nonzero(y == 0)[0]
    if pos.size == 0 or neg.size == 0:
        raise DataError("resampling needs both classes present")
    return (pos, neg) if pos.size < neg.size else (neg, pos)


def undersample_indices(y, rng) -> np.ndarray:
    minority, majority = _classes(y)
    kept = rng.choice(majority, size=minority.size, replace=False)
    return np.sort(np.concatenate([minority, kept]))


def duplicate_indices(y, rng) -> np.ndarray:
    minority, majority = _classes(y)
    extra = rng.choice(minority, size=majority.size - minority.size, replace=True)
    return np.concatenate([np.arange(len(y)), extra])


def smote(X, y, rng, k: int = 5):
    """Synthetic minority rows ``x + u * (neighbour - x)`` until the classes balance."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    minority, majority = _classes(y)
    n_new = majority.size - minority.size
    if n_new == 0:
        return X.copy(), y.copy()
    Xm = X[minority]
    if Xm.shape[0] == 1:
        synth = np.repeat(Xm, n_new, axis=0)
    else:
        k_eff = min(k, Xm.shape[0] - 1)
        nn = NearestNeighbors(n_neighbors=k_eff + 1).fit(Xm)
        _, idx = nn.kneighbors(Xm)
        idx = idx[:, 1:]
        base = rng.integers(0, Xm.shape[0], size=n_new)
        pick = idx[base, rng.integers(0, k_eff, size=n_new)]
        u = rng.random((n_new, 1))
        synth = Xm[base] + u * (Xm[pick] - Xm[base])
    label = int(y[minority[0]])
    return np.vstack([X, synth]), np.concatenate([y, np.full(n_new, label)])


def resample_training(X, y, method: str = "normal", seed=0, k: int = 5):
    """Rebalance training data.

    ``undersample`` drops majority rows at random; ``oversample`` runs SMOTE
    on tabular input and duplicates minority patients for sequence bundles.
    Returns ``(X', y')`` of the same container type as ``X``.
    """
    if method not in SAMPLING_METHODS:
        raise ValueError(f"sampling method must be one of {SAMPLING_METHODS}, got {method!r}")
    _check_provenance(X)
    y = np.asarray(y).astype(int)
    if method == "normal":
        return X, y
    rng = np.random.default_rng(seed)
    if method == "undersample" or isinstance(X, SubsetTensorBundle):
        idx = undersample_indices(y, rng) if method == "undersample" else duplicate_indices(y, rng)
        if isinstance(X, (SubsetTensorBundle, TabularData)):
            return X.take(idx), y[idx]
        return np.asarray(X)[idx], y[idx]
    Xs, ys = smote(np.asarray(X), y, rng, k)
    if isinstance(X, TabularData):
        return TabularData(Xs, X.feature_names, None, X.provenance), ys
    return Xs, ys
