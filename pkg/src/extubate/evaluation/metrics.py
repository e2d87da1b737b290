"""Threshold metrics, rank-based AUC-ROC and ROC points."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from ..exceptions import DataError


@dataclass
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(labels, preds) -> ConfusionMatrix:
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    if labels.shape != preds.shape:
        raise DataError(f"labels and predictions differ in length: {labels.shape} vs {preds.shape}")
    if not (np.isin(labels, (0, 1)).all() and np.isin(preds, (0, 1)).all()):
        raise DataError("labels and predictions must be 0/1")
    labels, preds = labels.astype(int), preds.astype(int)
    return ConfusionMatrix(
        tp=int(((labels == 1) & (preds == 1)).sum()),
        fp=int(((labels == 0) & (preds == 1)).sum()),
        tn=int(((labels == 0) & (preds == 0)).sum()),
        fn=int(((labels == 1) & (preds == 0)).sum()),
    )


def _ratio(a, b) -> float:
    # 0/0 is reported as 0
    return a / b if b else 0.0


def metrics(cm: ConfusionMatrix) -> dict[str, float]:
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    return {
        "accuracy": _ratio(cm.tp + cm.tn, cm.n),
        "precision": precision,
        "recall": recall,
        "specificity": _ratio(cm.tn, cm.tn + cm.fp),
        "f1": _ratio(2 * precision * recall, precision + recall),
    }


def _check_scores(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if scores.shape != labels.shape:
        raise DataError("scores and labels differ in length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC-ROC is undefined unless both classes are present")
    return scores, labels, n_pos, n_neg


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC: (concordant + 0.5 * tied pairs) / (n_pos * n_neg)."""
    scores, labels, n_pos, n_neg = _check_scores(scores, labels)
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_points(scores, labels) -> list[tuple[float, float, float]]:
    """``(fpr, tpr, threshold)`` at every distinct score, highest threshold first.

    Score >= threshold counts as positive. The first point is (0, 0, inf).
    """
    scores, labels, n_pos, n_neg = _check_scores(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    tps = np.cumsum(y)
    fps = np.cumsum(1 - y)
    last_of_group = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    pts = [(0.0, 0.0, float("inf"))]
    for i in last_of_group:
        pts.append((fps[i] / n_neg, tps[i] / n_pos, float(s[i])))
    return pts


def trapezoid_area(points) -> float:
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    auc_roc: float
    confusion: ConfusionMatrix
    roc: list = field(default_factory=list)
    threshold: float = 0.5
    config_hash: str = ""
    seed: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roc"] = [{"fpr": f, "tpr": t, "threshold": th} for f, t, th in self.roc]
        return d

    def write(self, json_path, roc_csv_path=None) -> None:
        d = self.to_dict()
        for p in d["roc"]:
            if p["threshold"] == float("inf"):
                p["threshold"] = "inf"
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if roc_csv_path is not None:
            with open(roc_csv_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["threshold", "fpr", "tpr"])
                for f, t, th in self.roc:
                    w.writerow([repr(th), repr(f), repr(t)])


def evaluate(probabilities, labels, threshold: float = 0.5, config_hash: str = "",
             seed=None) -> EvalReport:
    """Full report; a patient is predicted positive iff probability > threshold."""
    probs = np.asarray(probabilities, dtype=float)
    labels = np.asarray(labels).astype(int)
    cm = confusion(labels, (probs > threshold).astype(int))
    m = metrics(cm)
    return EvalReport(auc_roc=auc_roc(probs, labels), confusion=cm,
                      roc=roc_points(probs, labels), threshold=threshold,
                      config_hash=config_hash, seed=seed, **m)
