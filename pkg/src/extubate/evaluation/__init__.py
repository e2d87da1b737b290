"""Metrics, ROC construction, ablation and ensembles."""

from .ablation import AblationReport, ablation_targets, feature_ablation
from .ensemble import LogisticMeta, ensemble_average, ensemble_stack, out_of_fold_probabilities
from .metrics import (
    ConfusionMatrix,
    EvalReport,
    auc_roc,
    confusion,
    evaluate,
    metrics,
    roc_points,
    trapezoid_area,
)

__all__ = [
    "AblationReport",
    "ConfusionMatrix",
    "EvalReport",
    "LogisticMeta",
    "ablation_targets",
    "auc_roc",
    "confusion",
    "ensemble_average",
    "ensemble_stack",
    "evaluate",
    "feature_ablation",
    "metrics",
    "out_of_fold_probabilities",
    "roc_points",
    "trapezoid_area",
]
