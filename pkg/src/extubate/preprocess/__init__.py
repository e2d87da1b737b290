"""Leak-free preprocessing: every statistic is fitted on train patients only."""

from .aggregate import BaselineAggregator
from .events import as_event_frame
from .frequency import SubsetAssignment, assign_subsets, filter_low_observed, observation_frequency
from .outliers import OutlierBounds, apply_outlier_bounds, fit_outlier_bounds
from .resample import clip_categorical, impute_boundaries, place_on_minutes, resample_interpolate
from .scaling import ScalerState, StaticEncoder, age_bin, minmax_apply, minmax_fit
from .sequencer import SingleRateSequencer, SubsetSequencer, boundary_means
from .split import stratified_split, synthetic_proportion, synthetic_proportions

__all__ = [
    "BaselineAggregator",
    "OutlierBounds",
    "ScalerState",
    "SingleRateSequencer",
    "StaticEncoder",
    "SubsetAssignment",
    "SubsetSequencer",
    "age_bin",
    "apply_outlier_bounds",
    "as_event_frame",
    "assign_subsets",
    "boundary_means",
    "clip_categorical",
    "filter_low_observed",
    "fit_outlier_bounds",
    "impute_boundaries",
    "minmax_apply",
    "minmax_fit",
    "observation_frequency",
    "place_on_minutes",
    "resample_interpolate",
    "stratified_split",
    "synthetic_proportion",
    "synthetic_proportions",
]
