"""Leave-one-feature-out retraining."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from ..bundle import SubsetTensorBundle, TabularData
from .metrics import auc_roc


@dataclass
class AblationReport:
    """Rows ``(subset, feature, baseline_auc, ablated_auc, delta)``, most negative delta first."""

    rows: list = field(default_factory=list)

    def ranked(self) -> list[tuple[str, str]]:
        return [(r["subset"], r["feature"]) for r in self.rows]

    def delta(self, feature: str, subset: str | None = None) -> float:
        for r in self.rows:
            if r["feature"] == feature and (subset is None or r["subset"] == subset):
                return r["delta"]
        raise KeyError(feature)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["subset", "feature", "baseline_auc", "ablated_auc", "delta"])
            for r in self.rows:
                w.writerow([r["subset"], r["feature"], repr(r["baseline_auc"]),
                            repr(r["ablated_auc"]), repr(r["delta"])])


def ablation_targets(data, include_static: bool = True) -> list[tuple[str, str]]:
    if isinstance(data, TabularData):
        return [("tabular", f) for f in data.feature_names]
    if isinstance(data, SubsetTensorBundle):
        targets = list(data.dynamic_features)
        if include_static:
            targets += [("static", f) for f in data.static_features]
        return targets
    raise TypeError(f"cannot ablate features of {type(data).__name__}")


def _drop(data, subset, feature):
    if isinstance(data, TabularData):
        return data.drop_feature(feature)
    return data.drop_feature(feature, subset)


def _test_auc(estimator, train, y_train, test, y_test, seed):
    model = clone(estimator).set_params(random_state=seed)
    model.fit(train, y_train)
    return auc_roc(model.predict_proba(test)[:, 1], y_test)


def feature_ablation(estimator, train, y_train, test, y_test, features=None,
                     seeds=(0,)) -> AblationReport:
    """Retrain without each feature in turn and record the change in test AUC.

    Parameters
    ----------
    estimator : unfitted estimator
        Carries the fixed configuration; it is cloned for every run.
    train, test : SubsetTensorBundle or TabularData
    features : list of (subset, feature) or None
        Defaults to every dynamic feature, plus static columns when the
        estimator uses them.
    seeds : sequence of int
        Each run is repeated per seed and the AUCs are averaged.
    """
    if features is None:
        features = ablation_targets(train, bool(getattr(estimator, "use_static", True)))
    seeds = list(seeds)
    baseline = float(np.mean([_test_auc(estimator, train, y_train, test, y_test, s)
                              for s in seeds]))
    rows = []
    for subset, feature in features:
        tr, te = _drop(train, subset, feature), _drop(test, subset, feature)
        ablated = float(np.mean([_test_auc(estimator, tr, y_train, te, y_test, s) for s in seeds]))
        rows.append({"subset": subset, "feature": feature, "baseline_auc": baseline,
                     "ablated_auc": ablated, "delta": ablated - baseline})
    rows.sort(key=lambda r: r["delta"])
    return AblationReport(rows)
