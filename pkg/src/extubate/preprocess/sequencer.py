"""Event streams to masked, fixed-rate sequence tensors."""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..bundle import DEFAULT_INTERVALS, SUBSETS, SubsetTensor, SubsetTensorBundle, seq_len
from ..catalog import EXCLUDED_FEATURES
from .events import as_event_frame
from .frequency import assign_subsets, filter_low_observed, observation_frequency
from .outliers import apply_outlier_bounds, fit_outlier_bounds
from .resample import WINDOW, clip_categorical, impute_boundaries, resample_interpolate
from .scaling import ScalerState, minmax_apply, minmax_fit


def _series_index(df: pd.DataFrame):
    out = {}
    for key, g in df.groupby(["patient_id", "feature"], sort=False):
        out[key] = (g["time"].to_numpy(), g["value"].to_numpy())
    return out


def boundary_means(df: pd.DataFrame, features, interval: int) -> dict[str, tuple[float, float]]:
    """Train means of each feature over the first and last half-interval of the window."""
    half = interval / 2
    out = {}
    for f in features:
        g = df[df["feature"] == f]
        overall = float(g["value"].mean()) if len(g) else 0.0
        start = g.loc[g["time"] <= half, "value"]
        end = g.loc[g["time"] >= WINDOW - half, "value"]
        out[f] = (float(start.mean()) if len(start) else overall,
                  float(end.mean()) if len(end) else overall)
    return out


class SubsetSequencer(TransformerMixin, BaseEstimator):
    """Frequency-aware resampling into low/medium/high subset tensors.

    ``fit`` learns, from train patients only: observation frequencies, the
    retained feature list, subset assignment, outlier bounds, boundary means
    and min-max ranges. ``transform`` produces a ``SubsetTensorBundle`` in
    which a feature the patient never had is NaN (masked) at every step.

    Parameters
    ----------
    threshold : float
        Minimum mean observations per window for a feature to be kept.
    low_edge, high_edge : float
        Frequency edges between the low/medium and medium/high subsets.
    intervals : dict or None
        Resampling interval in minutes per subset (default 120/60/30).
    provided_bounds : dict or None
        Feature -> (lower, upper) bounds that override fitted ones.
    nonnegative : iterable of str
        Features whose fitted lower bound is clamped at 0.
    categorical : dict or None
        Feature -> score kind ('RAS', 'GCS-eye', 'GCS-motor'); these are
        rounded and clipped after interpolation and get no outlier bounds.
    features : iterable of str or None
        Candidate feature universe; defaults to every feature seen in fit.
    exclude : iterable of str
        Features removed before anything else.
    upsample : bool
        Use the 1-minute upsampling interpolation (``False`` resamples directly).
    """

    def __init__(self, threshold=0.5, low_edge=1.0, high_edge=3.0, intervals=None,
                 provided_bounds=None, nonnegative=(), categorical=None, features=None,
                 exclude=EXCLUDED_FEATURES, upsample=True):
        self.threshold = threshold
        self.low_edge = low_edge
        self.high_edge = high_edge
        self.intervals = intervals
        self.provided_bounds = provided_bounds
        self.nonnegative = nonnegative
        self.categorical = categorical
        self.features = features
        self.exclude = exclude
        self.upsample = upsample

    # subclasses override how features map onto subsets
    def _layout(self):
        a = self.assignment_
        return {s: (a.features(s), a.intervals[s]) for s in SUBSETS}

    def fit(self, events, patient_ids):
        df = as_event_frame(events)
        train_ids = list(patient_ids)
        categorical = dict(self.categorical or {})
        universe = None if self.features is None else [f for f in self.features if f not in set(self.exclude)]
        df = df[~df["feature"].isin(set(self.exclude))]
        train = df[df["patient_id"].isin(set(train_ids))]
        self.frequency_ = observation_frequency(train, train_ids, universe)
        self.retained_ = filter_low_observed(self.frequency_, self.threshold, self.exclude)
        self.assignment_ = assign_subsets(self.frequency_, self.retained_, self.low_edge,
                                          self.high_edge, self.intervals or DEFAULT_INTERVALS)
        numeric = [f for f in self.retained_ if f not in categorical]
        self.bounds_ = fit_outlier_bounds(train, self.provided_bounds, self.nonnegative, numeric)
        clean = self.clean(train)
        self.boundary_means_ = {}
        for subset, (feats, iv) in self._layout().items():
            self.boundary_means_[subset] = boundary_means(clean, feats, iv)
        raw = self._raw_grids(clean, train_ids)
        values = {}
        for subset, (feats, _) in self._layout().items():
            for j, f in enumerate(feats):
                values[f] = raw[subset][:, :, j].ravel()
        self.scaler_ = minmax_fit(values)
        return self

    def clean(self, events) -> pd.DataFrame:
        """Retained features only, with out-of-bound observations dropped."""
        check_is_fitted(self, "bounds_")
        df = as_event_frame(events)
        df = df[df["feature"].isin(set(self.retained_))]
        return apply_outlier_bounds(df, self.bounds_)

    def _fill_series(self, times, values, subset, feature, interval):
        start_mean, end_mean = self.boundary_means_[subset][feature]
        t, v = impute_boundaries(times, values, interval, start_mean, end_mean)
        return resample_interpolate(t, v, interval, upsample=self.upsample)

    def _raw_grids(self, clean: pd.DataFrame, patient_ids):
        index = _series_index(clean)
        categorical = dict(self.categorical or {})
        empty = (np.empty(0), np.empty(0))
        out = {}
        for subset, (feats, iv) in self._layout().items():
            arr = np.full((len(patient_ids), seq_len(iv), len(feats)), np.nan)
            for i, pid in enumerate(patient_ids):
                for j, f in enumerate(feats):
                    times, vals = index.get((pid, f), empty)
                    if len(times):
                        arr[i, :, j] = self._fill_series(times, vals, subset, f, iv)
            for j, f in enumerate(feats):
                if f in categorical:
                    col = arr[:, :, j]
                    ok = ~np.isnan(col)
                    col[ok] = clip_categorical(categorical[f], col[ok])
            out[subset] = arr
        return out

    def transform(self, events, patient_ids) -> SubsetTensorBundle:
        check_is_fitted(self, "scaler_")
        patient_ids = list(patient_ids)
        raw = self._raw_grids(self.clean(events), patient_ids)
        subsets = {}
        for subset, (feats, iv) in self._layout().items():
            arr = raw[subset]
            for j, f in enumerate(feats):
                lo, hi = self.scaler_.ranges[f]
                arr[:, :, j] = minmax_apply(arr[:, :, j], lo, hi)
            subsets[subset] = SubsetTensor(arr, ~np.isnan(arr), list(feats), iv)
        return SubsetTensorBundle(np.asarray(patient_ids), subsets)

    def fit_transform(self, events, patient_ids=None, **fit_params):
        return self.fit(events, patient_ids).transform(events, patient_ids)

    def state_dict(self) -> dict:
        """JSON-serialisable fitted state."""
        check_is_fitted(self, "scaler_")
        return {
            "frequency": self.frequency_,
            "retained": self.retained_,
            "assignment": self.assignment_.to_dict(),
            "bounds": self.bounds_.to_dict(),
            "boundary_means": {s: {f: list(v) for f, v in m.items()}
                               for s, m in self.boundary_means_.items()},
            "scaler": self.scaler_.to_dict(),
        }


class SingleRateSequencer(SubsetSequencer):
    """Every retained feature resampled at one interval, without masking.

    A patient who never had a feature gets a line between the train start and
    end means instead of NaNs. All features sit in the ``high`` subset; the
    ``low`` and ``medium`` subsets are zero-width placeholders.
    """

    def __init__(self, interval=30, threshold=0.5, provided_bounds=None, nonnegative=(),
                 categorical=None, features=None, exclude=EXCLUDED_FEATURES, upsample=True):
        super().__init__(threshold=threshold, provided_bounds=provided_bounds,
                         nonnegative=nonnegative, categorical=categorical, features=features,
                         exclude=exclude, upsample=upsample)
        self.interval = interval

    def _layout(self):
        return {"low": ([], 120), "medium": ([], 60), "high": (list(self.retained_), self.interval)}

    def _raw_grids(self, clean, patient_ids):
        out = super()._raw_grids(clean, patient_ids)
        arr = out["high"]
        grid = np.arange(0, WINDOW + 1, self.interval)
        for j, f in enumerate(self.retained_):
            start_mean, end_mean = self.boundary_means_["high"][f]
            line = np.interp(grid, [0, WINDOW], [start_mean, end_mean])
            missing = np.isnan(arr[:, 0, j])
            arr[missing, :, j] = line
        return out
