"""Mini-batch training loop with validation-AUC early stopping."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..evaluation.metrics import auc_roc
from ..exceptions import NumericError
from ..models.network import FusedNetwork, split_inputs
from ..tensorcore import sigmoid
from .losses import bce_loss, bce_with_logits
from .optim import AdamState, adam_step, clip_grad_norm


@dataclass
class EarlyStopping:
    """Stop once the score fails to beat the best by more than ``min_delta`` ``patience`` times in a row."""

    patience: int = 5
    min_delta: float = 0.0
    best_score: float = -np.inf
    best_epoch: int = -1
    stale: int = 0
    history: list = field(default_factory=list)

    def update(self, score: float, epoch: int) -> bool:
        """Record a score; returns True when it is a new best."""
        self.history.append(score)
        if score > self.best_score + self.min_delta:
            self.best_score = score
            self.best_epoch = epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


def batch_slices(n: int, batch_size: int, perm: np.ndarray, min_size: int = 1):
    """Index arrays of a shuffled epoch; a tail shorter than ``min_size`` joins the previous batch."""
    starts = list(range(0, n, batch_size))
    chunks = [perm[s:s + batch_size] for s in starts]
    if len(chunks) > 1 and len(chunks[-1]) < min_size:
        chunks[-2] = np.concatenate([chunks[-2], chunks.pop()])
    return chunks


def validation_score(probs, y) -> tuple[float, float | None]:
    """AUC when both classes are present, else the negated loss; also returns the AUC or None."""
    y = np.asarray(y).astype(int)
    if 0 < y.sum() < y.size:
        auc = auc_roc(probs, y)
        return auc, auc
    return -bce_loss(probs, y), None


def train_network(network: FusedNetwork, bundle, y, *, learning_rate=1e-3, batch_size=32,
                  num_epochs=10, weight_decay=0.0, sample_weight=None, grad_clip=None,
                  val_bundle=None, val_y=None, patience=5, min_delta=0.0, rng=None):
    """Fit ``network`` in place and return the epoch history.

    Each history row holds ``epoch``, ``train_loss`` and ``val_auc`` (None
    without a usable validation set). When validation data is supplied the
    parameters of the best-scoring epoch are restored at the end.
    """
    rng = np.random.default_rng(rng)
    y = np.asarray(y, dtype=float)
    n = len(y)
    inputs = split_inputs(bundle)
    static = bundle.static if network.spec.static_dim else None
    sw = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
    state = AdamState()
    stopper = EarlyStopping(patience, min_delta)
    best = None
    history = []
    # batch norm needs two rows per batch in training mode
    min_size = 2 if network.spec.family == "tcn" else 1
    for epoch in range(num_epochs):
        perm = rng.permutation(n)
        losses, sizes = [], []
        for b, idx in enumerate(batch_slices(n, batch_size, perm, min_size)):
            batch = [(x[idx], m[idx]) for x, m in inputs]
            logits, cache = network.forward(batch, None if static is None else static[idx],
                                            train=True, rng=rng)
            loss, dlogit = bce_with_logits(logits, y[idx], None if sw is None else sw[idx])
            if not np.isfinite(loss) or not np.all(np.isfinite(logits)):
                raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
            grads = network.backward(dlogit, cache)
            if grad_clip:
                grads, _ = clip_grad_norm(grads, grad_clip)
            adam_step(network.params, grads, state, learning_rate, weight_decay)
            losses.append(loss)
            sizes.append(len(idx))
        row = {"epoch": epoch + 1, "train_loss": float(np.average(losses, weights=sizes)),
               "val_auc": None}
        if val_bundle is not None and len(val_y):
            probs = sigmoid(network.predict_logits(val_bundle))
            score, row["val_auc"] = validation_score(probs, val_y)
            if stopper.update(score, epoch + 1):
                best = (copy.deepcopy(network.params), copy.deepcopy(network.buffers))
            row["best"] = stopper.best_epoch == epoch + 1
        history.append(row)
        if val_bundle is not None and stopper.should_stop:
            break
    if best is not None:
        network.params, network.buffers = best
    return history
