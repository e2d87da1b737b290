"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np


def relative_error(a, n) -> float:
    a = np.asarray(a, dtype=float)
    n = np.asarray(n, dtype=float)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numerical_grad(f: Callable[[], float], arr: np.ndarray, eps: float = 1e-5,
                   skip: Callable[[tuple], bool] | None = None) -> np.ndarray:
    """Central-difference gradient of scalar ``f()`` w.r.t. ``arr`` (perturbed in place).

    Entries for which ``skip(index)`` is true are left as NaN.
    """
    grad = np.zeros_like(arr, dtype=float)
    it = np.nditer(arr, flags=["multi_index"], op_flags=["readwrite"])
    for _ in it:
        idx = it.multi_index
        if skip is not None and skip(idx):
            grad[idx] = np.nan
            continue
        orig = arr[idx]
        arr[idx] = orig + eps
        up = f()
        arr[idx] = orig - eps
        down = f()
        arr[idx] = orig
        grad[idx] = (up - down) / (2 * eps)
    return grad


def grad_check(loss_fn: Callable[[], float], params: Mapping[str, np.ndarray],
               analytic: Mapping[str, np.ndarray], eps: float = 1e-5,
               skip: Mapping[str, Callable[[tuple], bool]] | None = None) -> float:
    """Maximum relative error between analytic and numerical gradients.

    ``loss_fn`` re-evaluates the loss from the current contents of ``params``;
    each array is perturbed in place and restored. ``skip`` optionally maps a
    parameter name to a predicate over indices to exclude (non-differentiable
    probe points such as a ReLU input at exactly zero).
    """
    worst = 0.0
    skip = skip or {}
    for name, arr in params.items():
        num = numerical_grad(loss_fn, arr, eps, skip.get(name))
        ok = ~np.isnan(num)
        worst = max(worst, relative_error(np.asarray(analytic[name])[ok], num[ok]))
    return worst
