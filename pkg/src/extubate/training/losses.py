"""Binary cross-entropy, plain and class-weighted, with logit gradients."""

from __future__ import annotations

import numpy as np

from ..tensorcore import sigmoid

CLAMP = 1e-12


def class_weights(y) -> np.ndarray:
    """Per-sample inverse-frequency weights ``n / (2 * n_class)``; mean is 1."""
    y = np.asarray(y).astype(int)
    n = y.size
    n_pos = int(y.sum())
    counts = np.array([n - n_pos, n_pos], dtype=float)
    w = np.where(counts > 0, n / (2.0 * np.maximum(counts, 1.0)), 0.0)
    return w[y]


def bce_loss(p, y, sample_weight=None) -> float:
    p = np.clip(np.asarray(p, dtype=float), CLAMP, 1.0 - CLAMP)
    y = np.asarray(y, dtype=float)
    terms = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    if sample_weight is not None:
        terms = terms * np.asarray(sample_weight, dtype=float)
    return float(terms.mean())


def weighted_bce(p, y, weights=None) -> float:
    """BCE with each term scaled by its class weight (``class_weights(y)`` by default)."""
    return bce_loss(p, y, class_weights(y) if weights is None else weights)


def bce_with_logits(logits, y, sample_weight=None):
    """Loss and its gradient with respect to the logits.

    The gradient ``w * (sigmoid(z) - y) / n`` avoids differentiating through
    the clamped logarithms.
    """
    z = np.asarray(logits, dtype=float)
    y = np.asarray(y, dtype=float)
    p = sigmoid(z)
    loss = bce_loss(p, y, sample_weight)
    grad = (p - y) / z.size
    if sample_weight is not None:
        grad = grad * np.asarray(sample_weight, dtype=float)
    return loss, grad
