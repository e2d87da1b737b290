"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np

from ..bundle import SubsetTensorBundle, TabularData
from ..exceptions import DataError, SchemaError


def check_bundle(X) -> SubsetTensorBundle:
    if not isinstance(X, SubsetTensorBundle):
        raise SchemaError(f"expected a SubsetTensorBundle, got {type(X).__name__}")
    X.validate(strict_nan=False)
    return X


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise DataError(f"expected {n} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    return y.astype(int)


def check_matrix(X, n_features: int | None = None) -> np.ndarray:
    X = X.X if isinstance(X, TabularData) else np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise SchemaError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("matrix contains NaN or infinite values")
    if n_features is not None and X.shape[1] != n_features:
        raise SchemaError(f"expected {n_features} columns, got {X.shape[1]}")
    return X
