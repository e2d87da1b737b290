"""Min-max scaling and static-profile encoding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..cohort import ETHNICITIES, GENDERS, charlson_score

AGE_BINS = ("<=44", "45-54", "55-64", "65-74", ">=75")


@dataclass
class ScalerState:
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: [lo, hi] for k, (lo, hi) in sorted(self.ranges.items())}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerState":
        return cls({k: (float(v[0]), float(v[1])) for k, v in d.items()})


def minmax_fit(train_values: dict[str, np.ndarray]) -> ScalerState:
    """Per-feature (min, max) over finite train values; features with none get (0, 0)."""
    state = ScalerState()
    for f, vals in train_values.items():
        vals = np.asarray(vals, dtype=float)
        vals = vals[np.isfinite(vals)]
        state.ranges[f] = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 0.0)
    return state


def minmax_apply(values, lo: float, hi: float):
    """Scale to [0, 1]; out-of-range values clamp, a degenerate range maps to 0, NaN stays NaN."""
    v = np.asarray(values, dtype=float)
    if hi <= lo:
        return np.where(np.isnan(v), np.nan, 0.0)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def age_bin(age: float) -> str:
    if age < 45:
        return "<=44"
    if age < 55:
        return "45-54"
    if age < 65:
        return "55-64"
    if age < 75:
        return "65-74"
    return ">=75"


class StaticEncoder(TransformerMixin, BaseEstimator):
    """Encode ``StaticProfile`` records into a numeric matrix.

    Age is one-hot over five bins, gender and ethnicity are one-hot. Weight and
    height values outside the train IQR fences are replaced by the train mean,
    as are missing values; BMI is then recomputed. Weight, height, BMI and
    (optionally) the Charlson score are min-max scaled on the train profiles.

    Parameters
    ----------
    include_charlson : bool
        Append the scaled Charlson score column.
    iqr_multiplier : float
        Fence half-width in IQR units beyond the quartiles; 0 uses the raw quartiles.
    """

    def __init__(self, include_charlson=False, iqr_multiplier=1.5):
        self.include_charlson = include_charlson
        self.iqr_multiplier = iqr_multiplier

    def _raw(self, profiles):
        w = np.array([np.nan if p.weight is None else p.weight for p in profiles], dtype=float)
        h = np.array([np.nan if p.height is None else p.height for p in profiles], dtype=float)
        return w, h

    def fit(self, profiles, y=None):
        w, h = self._raw(profiles)
        self.fences_ = {}
        self.means_ = {}
        for name, vals in (("weight", w), ("height", h)):
            obs = vals[~np.isnan(vals)]
            q1, q3 = np.percentile(obs, [25, 75])
            iqr = q3 - q1
            lo, hi = q1 - self.iqr_multiplier * iqr, q3 + self.iqr_multiplier * iqr
            self.fences_[name] = (float(lo), float(hi))
            inside = obs[(obs >= lo) & (obs <= hi)]
            self.means_[name] = float(inside.mean())
        cleaned = self._clean(profiles)
        self.scaler_ = minmax_fit(cleaned)
        self.feature_names_out_ = self._names()
        return self

    def _clean(self, profiles) -> dict[str, np.ndarray]:
        w, h = self._raw(profiles)
        out = {}
        for name, vals in (("weight", w), ("height", h)):
            lo, hi = self.fences_[name]
            bad = np.isnan(vals) | (vals < lo) | (vals > hi)
            out[name] = np.where(bad, self.means_[name], vals)
        out["bmi"] = out["weight"] / (out["height"] / 100.0) ** 2
        if self.include_charlson:
            out["charlson"] = np.array(
                [charlson_score(p.comorbidities, p.age) for p in profiles], dtype=float)
        return out

    def _names(self) -> list[str]:
        names = [f"age_{b}" for b in AGE_BINS]
        names += [f"gender_{g}" for g in GENDERS]
        names += [f"ethnicity_{e}" for e in ETHNICITIES]
        names += ["weight", "height", "bmi"]
        if self.include_charlson:
            names.append("charlson")
        return names

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "scaler_")
        return np.array(self.feature_names_out_, dtype=object)

    def transform(self, profiles):
        check_is_fitted(self, "scaler_")
        n = len(profiles)
        cols = []
        bins = [age_bin(p.age) for p in profiles]
        cols += [np.array([b == target for b in bins], dtype=float) for target in AGE_BINS]
        cols += [np.array([p.gender == g for p in profiles], dtype=float) for g in GENDERS]
        eth = [p.ethnicity if p.ethnicity in ETHNICITIES else "OTHER" for p in profiles]
        cols += [np.array([e == target for e in eth], dtype=float) for target in ETHNICITIES]
        cleaned = self._clean(profiles)
        for name in ("weight", "height", "bmi") + (("charlson",) if self.include_charlson else ()):
            lo, hi = self.scaler_.ranges[name]
            cols.append(minmax_apply(cleaned[name], lo, hi))
        return np.column_stack(cols) if n else np.zeros((0, len(self.feature_names_out_)))
