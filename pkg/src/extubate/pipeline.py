"""Cohort records to model-ready train/test data in one call."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import SubsetTensorBundle, TabularData
from .catalog import DEFAULT_CATALOG, PROVIDED_BOUNDS, catalog_for_set
from .cohort import annotate_outcome, apply_inclusion_exclusion
from .exceptions import DataError
from .preprocess import (
    BaselineAggregator,
    SingleRateSequencer,
    StaticEncoder,
    SubsetSequencer,
    as_event_frame,
    stratified_split,
    synthetic_proportions,
)


@dataclass
class PreparedData:
    train: SubsetTensorBundle
    test: SubsetTensorBundle
    train_tab: TabularData
    test_tab: TabularData
    y_train: np.ndarray
    y_test: np.ndarray
    train_ids: list
    test_ids: list
    sequencer: SubsetSequencer
    aggregator: BaselineAggregator
    encoder: StaticEncoder


def candidate_features(events, catalog=None, feature_set: int | None = None) -> list[str]:
    """Features present in the events, restricted to a catalog feature set when given."""
    seen = set(as_event_frame(events)["feature"].unique())
    if feature_set is None:
        return sorted(seen)
    allowed = {f.id for f in catalog_for_set(catalog or DEFAULT_CATALOG, feature_set)}
    return sorted(seen & allowed)


def prepare(events, profiles, timelines, *, catalog=None, feature_set=None, threshold=0.5,
            ratio=0.8, seed=0, single_rate=False, single_interval=30, upsample=True,
            include_charlson=False, intervals=None) -> PreparedData:
    """Filter, label, split and preprocess a cohort.

    Every fitted statistic (frequencies, bounds, boundary means, scalers,
    aggregate fills) comes from the train patients only.
    """
    catalog = list(catalog or DEFAULT_CATALOG)
    timelines, profiles = apply_inclusion_exclusion(timelines, profiles)
    if len(timelines) < 2:
        raise DataError("fewer than two patients remain after inclusion/exclusion")
    labels = {tl.patient_id: annotate_outcome(tl) for tl in timelines}
    ids = sorted(labels)
    df = as_event_frame(events)
    df = df[df["patient_id"].isin(set(ids))]
    features = candidate_features(df, catalog, feature_set)
    if not features:
        raise DataError("no candidate features in the events")
    props = synthetic_proportions(df, ids, features, 30)
    train_ids, test_ids = stratified_split(ids, [props[i] for i in ids], ratio, seed)

    kinds = {f.id: f.kind for f in catalog}
    categorical = {f: kinds[f] for f in features if kinds.get(f, "numeric") != "numeric"}
    nonneg = [f.id for f in catalog if f.nonnegative]
    bounds = {k: v for k, v in PROVIDED_BOUNDS.items() if k in set(features)}
    common = dict(threshold=threshold, provided_bounds=bounds, nonnegative=nonneg,
                  categorical=categorical, features=features)
    if single_rate:
        seq = SingleRateSequencer(interval=single_interval, upsample=upsample, **common)
    else:
        seq = SubsetSequencer(intervals=intervals, upsample=upsample, **common)
    seq.fit(df, train_ids)

    by_id = {p.patient_id: p for p in profiles}
    encoder = StaticEncoder(include_charlson=include_charlson)
    encoder.fit([by_id[i] for i in train_ids])
    static_names = list(encoder.get_feature_names_out())

    agg = BaselineAggregator(features=list(seq.retained_), categorical=list(categorical))
    agg.fit(df, train_ids)

    out = {}
    for tag, pids in (("train", train_ids), ("test", test_ids)):
        static = encoder.transform([by_id[i] for i in pids])
        bundle = seq.transform(df, pids)
        bundle = SubsetTensorBundle(bundle.patient_ids, bundle.subsets, static, static_names, tag)
        tab = TabularData(agg.transform(df, pids, static), list(agg.features_) + static_names,
                          np.asarray(pids), tag)
        out[tag] = (bundle, tab, np.array([labels[i] for i in pids], dtype=int))
    return PreparedData(out["train"][0], out["test"][0], out["train"][1], out["test"][1],
                        out["train"][2], out["test"][2], train_ids, test_ids, seq, agg, encoder)
