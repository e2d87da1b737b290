"""Dense layers, activations, dropout and batch normalisation.

Every layer is a pair of functions. ``*_forward`` returns the output and a
cache; ``*_backward`` consumes the upstream gradient plus that cache and
returns the input gradient followed by any parameter gradients.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeError

LEAKY_SLOPE = 0.01
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


# --------------------------------------------------------------------- linear

def linear_forward(x, W, b):
    """``y = x @ W.T + b`` with ``W`` stored as (out, in)."""
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(
            f"linear: expected input width {W.shape[1]}, got {x.shape[-1]}")
    return x @ W.T + b, (x, W)


def linear_backward(dy, cache):
    x, W = cache
    dx = dy @ W
    flat_x = x.reshape(-1, x.shape[-1])
    flat_dy = dy.reshape(-1, dy.shape[-1])
    return dx, flat_dy.T @ flat_x, flat_dy.sum(axis=0)


# ---------------------------------------------------------------- activations

def sigmoid(x):
    # tanh form avoids overflow in exp for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def tanh(x):
    return np.tanh(x)


def relu(x):
    return np.maximum(x, 0.0)


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x > 0, x, slope * x)


def activation_forward(name: str, x):
    if name == "sigmoid":
        y = sigmoid(x)
    elif name == "tanh":
        y = np.tanh(x)
    elif name == "relu":
        y = relu(x)
    elif name == "leaky_relu":
        y = leaky_relu(x)
    else:
        raise ValueError(f"unknown activation {name!r}")
    return y, (name, x, y)


def activation_backward(dy, cache):
    name, x, y = cache
    if name == "sigmoid":
        return dy * y * (1.0 - y)
    if name == "tanh":
        return dy * (1.0 - y * y)
    if name == "relu":
        return dy * (x > 0)
    return dy * np.where(x > 0, 1.0, LEAKY_SLOPE)


ACTIVATIONS = ("relu", "tanh", "sigmoid", "leaky_relu")


# -------------------------------------------------------------------- dropout

def dropout_forward(x, rate: float, rng: np.random.Generator | None, train: bool):
    """Inverted dropout. Eval mode, or ``rate == 0``, is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, keep


def dropout_backward(dy, cache):
    return dy if cache is None else dy * cache


# ---------------------------------------------------------- batch normalisation

def _bn_axes(x):
    # (B, C) or (B, C, T): statistics per channel over every other axis
    return (0,) if x.ndim == 2 else (0, 2)


def _bn_view(v, x):
    return v if x.ndim == 2 else v[None, :, None]


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train: bool,
                      eps: float = BN_EPS, momentum: float = BN_MOMENTUM):
    """Batch normalisation over channel axis 1.

    Returns ``(y, cache, new_running_mean, new_running_var)``; running
    statistics are returned rather than mutated so the caller decides where
    training state lives.
    """
    if not train:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (x - _bn_view(running_mean, x)) * _bn_view(inv_std, x)
        y = _bn_view(gamma, x) * xhat + _bn_view(beta, x)
        return y, ("eval", xhat, gamma, inv_std), running_mean, running_var

    if x.shape[0] < 2:
        raise ValueError("batch normalisation in train mode needs a batch of at least 2")
    axes = _bn_axes(x)
    n = x.size // x.shape[1]
    mean = x.mean(axis=axes)
    var = x.var(axis=axes)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - _bn_view(mean, x)) * _bn_view(inv_std, x)
    y = _bn_view(gamma, x) * xhat + _bn_view(beta, x)
    unbiased = var * n / max(n - 1, 1)
    new_mean = (1.0 - momentum) * running_mean + momentum * mean
    new_var = (1.0 - momentum) * running_var + momentum * unbiased
    return y, ("train", xhat, gamma, inv_std), new_mean, new_var


def batchnorm_backward(dy, cache):
    mode, xhat, gamma, inv_std = cache
    axes = _bn_axes(dy)
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * _bn_view(gamma, dy)
    if mode == "eval":
        return dxhat * _bn_view(inv_std, dy), dgamma, dbeta
    n = dy.size // dy.shape[1]
    sum_dxhat = _bn_view(dxhat.sum(axis=axes), dy)
    sum_dxhat_xhat = _bn_view((dxhat * xhat).sum(axis=axes), dy)
    dx = _bn_view(inv_std, dy) / n * (n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx, dgamma, dbeta
