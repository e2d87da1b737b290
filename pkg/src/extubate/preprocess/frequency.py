"""Observation frequencies and frequency-based subset assignment."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..bundle import DEFAULT_INTERVALS, SUBSETS, seq_len
from ..catalog import EXCLUDED_FEATURES
from .events import as_event_frame


def observation_frequency(events, train_ids, features=None) -> dict[str, float]:
    """Mean observation count per train patient for every feature.

    ``features`` fixes the feature universe, so features never observed in
    the train split report 0.0.
    """
    train_ids = list(train_ids)
    if not train_ids:
        raise ValueError("train_ids must be non-empty")
    df = as_event_frame(events)
    df = df[df["patient_id"].isin(set(train_ids))]
    counts = df.groupby("feature").size()
    universe = sorted(set(features) if features is not None else set(counts.index))
    return {f: float(counts.get(f, 0)) / len(train_ids) for f in universe}


def filter_low_observed(profile: dict[str, float], threshold: float,
                        exclude=EXCLUDED_FEATURES) -> list[str]:
    """Features observed at least ``threshold`` times per window on average.

    Ordered by descending frequency, then feature id.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    keep = [f for f, v in profile.items() if v >= threshold and f not in exclude]
    return sorted(keep, key=lambda f: (-profile[f], f))


@dataclass
class SubsetAssignment:
    low: list[str]
    medium: list[str]
    high: list[str]
    intervals: dict[str, int]

    def features(self, subset: str) -> list[str]:
        return getattr(self, subset)

    def seq_lens(self) -> dict[str, int]:
        return {s: seq_len(self.intervals[s]) for s in SUBSETS}

    def subset_of(self, feature: str) -> str:
        for s in SUBSETS:
            if feature in getattr(self, s):
                return s
        raise KeyError(feature)

    def to_dict(self) -> dict:
        return asdict(self)


def assign_subsets(profile: dict[str, float], retained, low_edge: float = 1.0,
                   high_edge: float = 3.0, intervals=None) -> SubsetAssignment:
    """Split retained features into low (< 1), medium ([1, 3]) and high (> 3) frequency groups."""
    intervals = dict(intervals or DEFAULT_INTERVALS)
    for s, iv in intervals.items():
        if 360 % iv:
            raise ValueError(f"interval {iv} for subset {s!r} does not divide 360")
    groups = {s: [] for s in SUBSETS}
    for f in retained:
        v = profile[f]
        if v < low_edge:
            groups["low"].append(f)
        elif v <= high_edge:
            groups["medium"].append(f)
        else:
            groups["high"].append(f)
    return SubsetAssignment(groups["low"], groups["medium"], groups["high"], intervals)
