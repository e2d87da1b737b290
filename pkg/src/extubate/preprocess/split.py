"""Synthetic-data proportion and the frozen stratified train/test split."""

from __future__ import annotations

import math

import numpy as np

from .events import as_event_frame
from .resample import place_on_minutes, target_grid


def synthetic_proportion(patient_events, features, interval: int = 30) -> float:
    """Grid points lacking a real observation within half an interval, averaged over features.

    ``patient_events`` holds one patient's observations (frame or records).
    A feature with no observations contributes all 13 points of a 30-minute grid.
    """
    features = list(features)
    if not features:
        raise ValueError("features must be non-empty")
    df = as_event_frame(patient_events)
    grid = target_grid(interval)
    half = interval / 2
    total = 0
    for f in features:
        t, _ = place_on_minutes(df.loc[df["feature"] == f, "time"], df.loc[df["feature"] == f, "value"])
        if t.size == 0:
            total += grid.size
            continue
        covered = (np.abs(grid[:, None] - t[None, :]) <= half).any(axis=1)
        total += int((~covered).sum())
    return total / len(features)


def synthetic_proportions(events, patient_ids, features, interval: int = 30) -> dict:
    df = as_event_frame(events)
    df = df[df["feature"].isin(set(features))]
    groups = dict(tuple(df.groupby("patient_id", sort=False)))
    empty = df.iloc[0:0]
    return {pid: synthetic_proportion(groups.get(pid, empty), features, interval)
            for pid in patient_ids}


def stratified_split(patient_ids, strat_values, ratio: float = 0.8, seed: int = 0,
                     n_bins: int = 10):
    """Split patients ``ratio : 1 - ratio`` within quantile bins of ``strat_values``.

    Patients are ranked by their stratification value (ties broken by a
    seeded shuffle), cut into ``n_bins`` equal-count bins, and each bin
    contributes its share of the ``floor(ratio * n)`` train places by the
    largest-remainder rule. Returns sorted ``(train_ids, test_ids)`` lists.
    """
    ids = list(patient_ids)
    vals = np.asarray(strat_values, dtype=float)
    n = len(ids)
    if n < 2:
        raise ValueError("at least two patients are needed to split")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    if vals.shape != (n,):
        raise ValueError("one stratification value per patient is required")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    order = perm[np.argsort(vals[perm], kind="stable")]
    bins = [b for b in np.array_split(order, min(n_bins, n)) if b.size]
    n_train = math.floor(ratio * n + 1e-9)
    n_train = min(max(n_train, 1), n - 1)
    quotas = np.array([ratio * b.size for b in bins])
    alloc = np.floor(quotas).astype(int)
    short = n_train - alloc.sum()
    if short > 0:
        rem = quotas - alloc
        for i in np.argsort(-rem, kind="stable")[:short]:
            alloc[i] += 1
    elif short < 0:
        for i in np.argsort(quotas - alloc, kind="stable")[:-short]:
            alloc[i] -= 1
    train = []
    for b, k in zip(bins, alloc):
        chosen = rng.permutation(b)[:k]
        train.extend(chosen.tolist())
    train_set = set(train)
    train_ids = sorted(ids[i] for i in train_set)
    test_ids = sorted(ids[i] for i in range(n) if i not in train_set)
    return train_ids, test_ids
