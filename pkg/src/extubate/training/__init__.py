"""Losses, optimiser, imbalance handling, early stopping, cross-validation and search."""

from .cv import CVResult, SearchResult, draw_configs, fold_indices, hyperparam_search, kfold_cv
from .loop import EarlyStopping, batch_slices, train_network
from .losses import bce_loss, bce_with_logits, class_weights, weighted_bce
from .optim import AdamState, adam_step, clip_grad_norm, global_norm
from .sampling import SAMPLING_METHODS, resample_training, smote

__all__ = [
    "AdamState",
    "CVResult",
    "EarlyStopping",
    "SAMPLING_METHODS",
    "SearchResult",
    "adam_step",
    "batch_slices",
    "bce_loss",
    "bce_with_logits",
    "class_weights",
    "clip_grad_norm",
    "draw_configs",
    "fold_indices",
    "global_norm",
    "hyperparam_search",
    "kfold_cv",
    "resample_training",
    "smote",
    "train_network",
    "weighted_bce",
]
