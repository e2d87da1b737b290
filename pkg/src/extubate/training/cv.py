"""K-fold cross-validation and hyperparameter search."""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone
from sklearn.model_selection import KFold

from ..bundle import take_rows
from ..evaluation.metrics import auc_roc
from ..exceptions import ConfigError, DataError

STRATEGIES = ("grid", "random", "adaptive")


def fold_indices(n: int, k: int, seed=0):
    if k < 2:
        raise ValueError("k must be at least 2")
    if k >= n:
        raise DataError(f"k={k} leaves single-patient (or empty) folds for n={n}; AUC is undefined")
    return list(KFold(n_splits=k, shuffle=True, random_state=seed).split(np.zeros(n)))


def _fold_auc(estimator, X, y, tr, va, i):
    if y[va].min() == y[va].max():
        warnings.warn(f"fold {i} has a single class in validation; skipped", UserWarning,
                      stacklevel=3)
        return None
    model = clone(estimator).fit(take_rows(X, tr), y[tr])
    return auc_roc(model.predict_proba(take_rows(X, va))[:, 1], y[va])


@dataclass
class CVResult:
    fold_aucs: list
    fold_sizes: list

    @property
    def mean_auc(self) -> float:
        vals = [a for a in self.fold_aucs if a is not None]
        return float(np.mean(vals)) if vals else float("nan")


def kfold_cv(estimator, X, y, k: int = 5, seed=0) -> CVResult:
    """Patient-level k-fold AUC. Resampling happens inside each estimator fit, so on training folds only."""
    y = np.asarray(y).astype(int)
    folds = fold_indices(len(y), k, seed)
    aucs = [_fold_auc(estimator, X, y, tr, va, i) for i, (tr, va) in enumerate(folds)]
    return CVResult(aucs, [len(va) for _, va in folds])


def _n_combinations(space) -> int:
    return math.prod(len(v) for v in space.values())


def _decode(space, index: int) -> dict:
    params = {}
    for name in reversed(list(space)):
        options = space[name]
        index, r = divmod(index, len(options))
        params[name] = options[r]
    return {name: params[name] for name in space}


def check_space(space: dict) -> dict:
    if not space:
        raise ConfigError("search space is empty")
    for name, options in space.items():
        if not isinstance(options, (list, tuple)) or len(options) == 0:
            raise ConfigError(f"search space entry {name!r} needs a non-empty list of candidates")
    return {k: list(v) for k, v in space.items()}


def draw_configs(space, strategy: str, n_trials: int, seed=0) -> list[dict]:
    space = check_space(space)
    total = _n_combinations(space)
    if strategy == "grid":
        names = list(space)
        return [dict(zip(names, combo)) for combo in itertools.product(*space.values())]
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    rng = np.random.default_rng(seed)
    if n_trials >= total:
        picks = rng.permutation(total)
    else:
        picks = rng.choice(total, size=n_trials, replace=False)
    return [_decode(space, int(i)) for i in picks]


@dataclass
class SearchResult:
    best_params: dict
    best_score: float
    trials: list = field(default_factory=list)

    def write(self, csv_path=None, json_path=None) -> None:
        if csv_path is not None:
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["trial", "rung", "n_folds", "params", "fold_aucs", "mean_auc"])
                for t in self.trials:
                    w.writerow([t["trial"], t["rung"], t["n_folds"],
                                json.dumps(t["params"], sort_keys=True),
                                json.dumps(t["fold_aucs"]), repr(t["mean_auc"])])
        if json_path is not None:
            with open(json_path, "w", encoding="utf-8") as fh:
                json.dump({"best_params": self.best_params, "best_score": self.best_score,
                           "trials": self.trials}, fh, indent=2, sort_keys=True)
                fh.write("\n")


def _mean(aucs):
    vals = [a for a in aucs if a is not None]
    return float(np.mean(vals)) if vals else float("-inf")


def hyperparam_search(estimator, space: dict, X, y, strategy: str = "grid", n_trials: int = 10,
                      k: int = 5, seed=0, eta: int = 3) -> SearchResult:
    """Search ``space`` scoring each configuration by k-fold AUC.

    ``grid`` tries every combination, ``random`` draws ``n_trials`` distinct
    ones, and ``adaptive`` runs successive halving over ``n_trials`` random
    draws: survivors of each rung (the best ``1/eta``) are scored on more
    folds (1, eta, eta**2, ... up to k). Ties go to the earliest trial.
    """
    y = np.asarray(y).astype(int)
    configs = draw_configs(space, strategy, n_trials, seed)
    folds = fold_indices(len(y), k, seed)
    cache: dict[tuple[int, int], float | None] = {}

    def score(ti, n_folds):
        model = clone(estimator).set_params(**configs[ti])
        for i in range(n_folds):
            if (ti, i) not in cache:
                tr, va = folds[i]
                cache[(ti, i)] = _fold_auc(model, X, y, tr, va, i)
        return [cache[(ti, i)] for i in range(n_folds)]

    trials = []

    def record(ti, rung, aucs):
        trials.append({"trial": ti, "rung": rung, "n_folds": len(aucs), "params": configs[ti],
                       "fold_aucs": aucs, "mean_auc": _mean(aucs)})

    if strategy != "adaptive":
        for ti in range(len(configs)):
            record(ti, 0, score(ti, k))
        best = max(trials, key=lambda t: (t["mean_auc"], -t["trial"]))
        return SearchResult(dict(best["params"]), best["mean_auc"], trials)

    alive = list(range(len(configs)))
    rung, n_folds = 0, 1
    while True:
        scores = {}
        for ti in alive:
            aucs = score(ti, n_folds)
            record(ti, rung, aucs)
            scores[ti] = _mean(aucs)
        if n_folds >= k or len(alive) == 1:
            break
        keep = max(1, math.ceil(len(alive) / eta))
        alive = sorted(alive, key=lambda ti: (-scores[ti], ti))[:keep]
        alive.sort()
        rung += 1
        n_folds = min(k, eta ** rung)
    best_ti = max(alive, key=lambda ti: (scores[ti], -ti))
    return SearchResult(dict(configs[best_ti]), scores[best_ti], trials)
