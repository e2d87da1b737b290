"""Train-fitted outlier bounds; out-of-range observations are dropped."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .events import as_event_frame


@dataclass
class OutlierBounds:
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    source: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {f: {"lower": lo, "upper": hi, "source": self.source[f]}
                for f, (lo, hi) in sorted(self.bounds.items())}

    @classmethod
    def from_dict(cls, d: dict) -> "OutlierBounds":
        return cls({f: (v["lower"], v["upper"]) for f, v in d.items()},
                   {f: v["source"] for f, v in d.items()})


def fit_outlier_bounds(train_events, provided=None, nonnegative=(), features=None,
                       n_std: float = 3.0) -> OutlierBounds:
    """Provided bounds win; otherwise mean +- 3 sample standard deviations.

    The lower bound is clamped to 0 for features in ``nonnegative``. A feature
    with fewer than two train observations and no provided bound gets no
    bound at all (it passes through unfiltered) and a warning is emitted.
    """
    provided = dict(provided or {})
    df = as_event_frame(train_events)
    if features is not None:
        df = df[df["feature"].isin(set(features))]
    out = OutlierBounds()
    names = set(df["feature"]) | set(provided)
    if features is not None:
        names &= set(features)
    grouped = {f: g["value"].to_numpy() for f, g in df.groupby("feature")}
    nonnegative = set(nonnegative)
    for f in sorted(names):
        if f in provided:
            lo, hi = provided[f]
            out.bounds[f] = (float(lo), float(hi))
            out.source[f] = "provided"
            continue
        vals = grouped.get(f, np.empty(0))
        if len(vals) < 2:
            warnings.warn(f"outlier bounds skipped for {f!r}: fewer than 2 train observations",
                          stacklevel=2)
            continue
        mu = float(vals.mean())
        sd = float(vals.std(ddof=1))
        lo, hi = mu - n_std * sd, mu + n_std * sd
        if f in nonnegative:
            lo = max(lo, 0.0)
        out.bounds[f] = (lo, hi)
        out.source[f] = "fitted"
    return out


def apply_outlier_bounds(events, bounds: OutlierBounds) -> pd.DataFrame:
    """Drop observations outside their feature's [lower, upper] range (inclusive)."""
    df = as_event_frame(events)
    if df.empty:
        return df
    lo = df["feature"].map(lambda f: bounds.bounds.get(f, (-np.inf, np.inf))[0])
    hi = df["feature"].map(lambda f: bounds.bounds.get(f, (-np.inf, np.inf))[1])
    keep = (df["value"] >= lo) & (df["value"] <= hi)
    return df[keep.to_numpy()]
