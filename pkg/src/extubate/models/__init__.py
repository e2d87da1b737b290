"""Fused temporal classifiers and the boosted-tree baseline."""

from .estimators import FusedLSTMClassifier, FusedTCNClassifier
from .gbdt import GBDTClassifier
from .network import FusedNetwork, FusedSpec, fused_forward, last_valid_output, split_inputs

__all__ = [
    "FusedLSTMClassifier",
    "FusedNetwork",
    "FusedSpec",
    "FusedTCNClassifier",
    "GBDTClassifier",
    "fused_forward",
    "last_valid_output",
    "split_inputs",
]
