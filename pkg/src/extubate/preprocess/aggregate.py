"""Window-level aggregation into a tabular matrix for the tree baseline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .events import as_event_frame


def _mode(values) -> float:
    # ties go to the smaller value: np.unique sorts ascending and argmax takes the first
    uniq, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
    return float(uniq[np.argmax(counts)])


class BaselineAggregator(TransformerMixin, BaseEstimator):
    """Per-patient mean (numeric) or mode (categorical) of each feature over the window.

    Patients missing a feature get the train-population mean of the
    per-patient means, or the train mode for categorical features.
    """

    def __init__(self, features=None, categorical=None):
        self.features = features
        self.categorical = categorical

    def _per_patient(self, df, patient_ids):
        categorical = set(self.categorical or ())
        out = np.full((len(patient_ids), len(self.features_)), np.nan)
        row = {pid: i for i, pid in enumerate(patient_ids)}
        df = df[df["feature"].isin(set(self.features_)) & df["patient_id"].isin(set(row))]
        col = {f: j for j, f in enumerate(self.features_)}
        for (pid, f), g in df.groupby(["patient_id", "feature"], sort=False):
            vals = g["value"].to_numpy()
            out[row[pid], col[f]] = _mode(vals) if f in categorical else float(vals.mean())
        return out

    def fit(self, events, patient_ids):
        df = as_event_frame(events)
        self.features_ = list(self.features) if self.features is not None else sorted(df["feature"].unique())
        categorical = set(self.categorical or ())
        agg = self._per_patient(df, list(patient_ids))
        self.fill_ = {}
        for j, f in enumerate(self.features_):
            col = agg[:, j]
            col = col[~np.isnan(col)]
            if col.size == 0:
                self.fill_[f] = 0.0
            else:
                self.fill_[f] = _mode(col) if f in categorical else float(col.mean())
        return self

    def transform(self, events, patient_ids, static=None):
        check_is_fitted(self, "fill_")
        agg = self._per_patient(as_event_frame(events), list(patient_ids))
        for j, f in enumerate(self.features_):
            agg[np.isnan(agg[:, j]), j] = self.fill_[f]
        if static is not None:
            agg = np.hstack([agg, np.asarray(static, dtype=float)])
        return agg

    def fit_transform(self, events, patient_ids=None, **fit_params):
        return self.fit(events, patient_ids).transform(events, patient_ids)
