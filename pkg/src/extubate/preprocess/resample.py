"""Boundary imputation, 1-minute linear interpolation and categorical clipping.

A series is a pair of arrays ``(times, values)`` in minutes relative to the
window start. Times are snapped to whole minutes; when two observations land
on the same minute the later-recorded one wins.
"""

from __future__ import annotations

import numpy as np

from ..catalog import CATEGORICAL_KINDS

WINDOW = 360


def place_on_minutes(times, values):
    """Collapse a series onto integer minutes in [0, 360], last write wins.

    Returns sorted unique minutes and their values.
    """
    t = np.clip(np.rint(np.asarray(times, dtype=float)), 0, WINDOW).astype(int)
    v = np.asarray(values, dtype=float)
    if t.size == 0:
        return t, v
    # reverse so np.unique's first occurrence is the last-written observation
    uniq, first_rev = np.unique(t[::-1], return_index=True)
    return uniq, v[::-1][first_rev]


def impute_boundaries(times, values, interval: int, start_mean: float, end_mean: float):
    """Give a non-empty series values at minute 0 and minute 360.

    An existing value at the boundary is kept. Otherwise the earliest
    (latest) observation within ``interval / 2`` minutes of the start (end)
    is copied to the boundary, and failing that the train-set boundary mean
    is used. An empty series is returned unchanged.
    """
    t, v = place_on_minutes(times, values)
    if t.size == 0:
        return t.astype(float), v
    half = interval / 2
    add_t, add_v = [], []
    if t[0] != 0:
        add_t.append(0)
        add_v.append(v[0] if t[0] <= half else start_mean)
    if t[-1] != WINDOW:
        add_t.append(WINDOW)
        add_v.append(v[-1] if t[-1] >= WINDOW - half else end_mean)
    t = np.concatenate([t, np.asarray(add_t, dtype=int)])
    v = np.concatenate([v, np.asarray(add_v, dtype=float)])
    order = np.argsort(t, kind="stable")
    return t[order].astype(float), v[order]


def target_grid(interval: int) -> np.ndarray:
    return np.arange(0, WINDOW + 1, interval)


def resample_interpolate(times, values, interval: int, upsample: bool = True):
    """Values on the ``interval`` grid over [0, 360]; all-NaN for an empty series.

    With ``upsample`` (the default) every observation is placed on a
    1-minute grid, interior gaps are filled linearly and the grid is then
    subsampled. Grid points outside the observed span take the patient's own
    mean. ``upsample=False`` reproduces direct resampling, where only
    observations sitting exactly on a grid minute survive.
    """
    grid = target_grid(interval)
    t, v = place_on_minutes(times, values)
    if not upsample:
        on_grid = t % interval == 0
        t, v = t[on_grid], v[on_grid]
    if t.size == 0:
        return np.full(grid.shape, np.nan)
    out = np.interp(grid, t, v)
    outside = (grid < t[0]) | (grid > t[-1])
    out[outside] = v.mean()
    return out


def clip_categorical(kind: str, values):
    """Round half away from zero, then clamp to the score's valid range."""
    lo, hi = CATEGORICAL_KINDS[kind]
    v = np.asarray(values, dtype=float)
    rounded = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(rounded, lo, hi)
