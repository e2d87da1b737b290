"""Masked multi-rate sequence tensors shared by preprocessing and the models."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import SchemaError

SUBSETS = ("low", "medium", "high")
DEFAULT_INTERVALS = {"low": 120, "medium": 60, "high": 30}
WINDOW_MINUTES = 360


def seq_len(interval: int) -> int:
    return WINDOW_MINUTES // interval + 1


@dataclass
class SubsetTensor:
    """One frequency subset: ``values`` and ``mask`` are (patients, steps, features)."""

    values: np.ndarray
    mask: np.ndarray
    features: list[str]
    interval: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    def validate(self, strict_nan: bool = True) -> None:
        if self.values.shape != self.mask.shape:
            raise SchemaError(
                f"values shape {self.values.shape} != mask shape {self.mask.shape}")
        if self.values.ndim != 3 or self.values.shape[2] != len(self.features):
            raise SchemaError(
                f"expected (patients, steps, {len(self.features)}) values, got {self.values.shape}")
        if self.values.shape[1] != seq_len(self.interval):
            raise SchemaError(
                f"interval {self.interval} implies {seq_len(self.interval)} steps, "
                f"got {self.values.shape[1]}")
        observed_nan = np.isnan(self.values) & self.mask
        if observed_nan.any():
            raise SchemaError("NaN found at a position the mask marks as observed")
        if strict_nan and (~np.isnan(self.values) & ~self.mask).any():
            raise SchemaError("finite value found at a masked position")

    def take(self, idx) -> "SubsetTensor":
        return replace(self, values=self.values[idx], mask=self.mask[idx],
                       features=list(self.features))

    def drop(self, feature: str) -> "SubsetTensor":
        keep = [i for i, f in enumerate(self.features) if f != feature]
        return replace(self, values=self.values[:, :, keep], mask=self.mask[:, :, keep],
                       features=[self.features[i] for i in keep])


@dataclass
class SubsetTensorBundle:
    """Three subset tensors with a shared patient order and an optional static matrix."""

    patient_ids: np.ndarray
    subsets: dict[str, SubsetTensor]
    static: np.ndarray | None = None
    static_features: list[str] = field(default_factory=list)
    # 'train', 'validation' or 'test'; resampling refuses the latter two
    provenance: str | None = None

    def __post_init__(self):
        self.patient_ids = np.asarray(self.patient_ids)

    def __len__(self) -> int:
        return len(self.patient_ids)

    @property
    def feature_order(self) -> dict[str, list[str]]:
        order = {name: list(self.subsets[name].features) for name in SUBSETS}
        order["static"] = list(self.static_features)
        return order

    @property
    def dynamic_features(self) -> list[tuple[str, str]]:
        return [(name, f) for name in SUBSETS for f in self.subsets[name].features]

    def validate(self, strict_nan: bool = True) -> None:
        if set(self.subsets) != set(SUBSETS):
            raise SchemaError(f"bundle must hold subsets {SUBSETS}, got {sorted(self.subsets)}")
        n = len(self.patient_ids)
        for name in SUBSETS:
            sub = self.subsets[name]
            sub.validate(strict_nan)
            if sub.values.shape[0] != n:
                raise SchemaError(
                    f"subset {name!r} holds {sub.values.shape[0]} patients, expected {n}")
        if self.static is not None:
            if self.static.shape != (n, len(self.static_features)):
                raise SchemaError(
                    f"static matrix shape {self.static.shape} != {(n, len(self.static_features))}")

    def take(self, idx) -> "SubsetTensorBundle":
        idx = np.asarray(idx)
        return SubsetTensorBundle(
            patient_ids=self.patient_ids[idx],
            subsets={k: v.take(idx) for k, v in self.subsets.items()},
            static=None if self.static is None else self.static[idx],
            static_features=list(self.static_features),
            provenance=self.provenance,
        )

    def with_provenance(self, tag: str | None) -> "SubsetTensorBundle":
        return replace(self, provenance=tag)

    def without_static(self) -> "SubsetTensorBundle":
        return SubsetTensorBundle(self.patient_ids, dict(self.subsets), provenance=self.provenance)

    def drop_feature(self, feature: str, subset: str | None = None) -> "SubsetTensorBundle":
        """Remove one dynamic feature (or, with ``subset='static'``, one static column).

        Removing the last feature of a subset leaves a zero-width subset that
        the models treat as an all-masked placeholder branch.
        """
        if subset == "static":
            if feature not in self.static_features:
                raise KeyError(feature)
            keep = [i for i, f in enumerate(self.static_features) if f != feature]
            return SubsetTensorBundle(self.patient_ids, dict(self.subsets),
                                      self.static[:, keep],
                                      [self.static_features[i] for i in keep], self.provenance)
        targets = [subset] if subset else [s for s in SUBSETS if feature in self.subsets[s].features]
        if not targets or feature not in self.subsets[targets[0]].features:
            raise KeyError(feature)
        subsets = dict(self.subsets)
        for name in targets:
            subsets[name] = subsets[name].drop(feature)
        return SubsetTensorBundle(self.patient_ids, subsets, self.static,
                                  list(self.static_features), self.provenance)


@dataclass
class TabularData:
    """Feature matrix with column names, for the tree baseline."""

    X: np.ndarray
    feature_names: list[str]
    patient_ids: np.ndarray | None = None
    provenance: str | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.feature_names = list(self.feature_names)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise SchemaError(f"matrix shape {self.X.shape} does not match "
                              f"{len(self.feature_names)} feature names")

    def __len__(self) -> int:
        return self.X.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.X if dtype is None else self.X.astype(dtype)

    def take(self, idx) -> "TabularData":
        idx = np.asarray(idx)
        pids = None if self.patient_ids is None else np.asarray(self.patient_ids)[idx]
        return TabularData(self.X[idx], self.feature_names, pids, self.provenance)

    def with_provenance(self, tag: str | None) -> "TabularData":
        return replace(self, provenance=tag)

    def drop_feature(self, feature: str, subset: str | None = None) -> "TabularData":
        if feature not in self.feature_names:
            raise KeyError(feature)
        keep = [i for i, f in enumerate(self.feature_names) if f != feature]
        return TabularData(self.X[:, keep], [self.feature_names[i] for i in keep],
                           self.patient_ids, self.provenance)


def take_rows(X, idx):
    """Row subset of a bundle, tabular container or plain array."""
    if isinstance(X, (TabularData, SubsetTensorBundle)):
        return X.take(idx)
    return np.asarray(X)[idx]
