"""Stacked LSTM with back-propagation through time.

Gate blocks are ordered input, forget, candidate, output along the 4H axis.
Hidden and cell states start at zero.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeError
from .layers import dropout_backward, dropout_forward, sigmoid


def lstm_layer_forward(x, W_ih, W_hh, b):
    B, T, F = x.shape
    H = W_hh.shape[1]
    if W_ih.shape != (4 * H, F):
        raise ShapeError(f"lstm: expected W_ih shape {(4 * H, F)}, got {W_ih.shape}")
    if b.shape != (4 * H,):
        raise ShapeError(f"lstm: expected bias shape {(4 * H,)}, got {b.shape}")
    # input projection for all steps at once
    xz = x @ W_ih.T + b
    hs = np.zeros((B, T + 1, H))
    cs = np.zeros((B, T + 1, H))
    gates = np.empty((B, T, 4 * H))
    for t in range(T):
        z = xz[:, t] + hs[:, t] @ W_hh.T
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = sigmoid(z[:, 3 * H:])
        cs[:, t + 1] = f * cs[:, t] + i * g
        hs[:, t + 1] = o * np.tanh(cs[:, t + 1])
        gates[:, t] = np.concatenate([i, f, g, o], axis=1)
    return hs[:, 1:], (x, W_ih, W_hh, hs, cs, gates)


def lstm_layer_backward(dhs, cache):
    x, W_ih, W_hh, hs, cs, gates = cache
    B, T, H = dhs.shape
    dz_all = np.empty((B, T, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        i = gates[:, t, :H]
        f = gates[:, t, H:2 * H]
        g = gates[:, t, 2 * H:3 * H]
        o = gates[:, t, 3 * H:]
        tc = np.tanh(cs[:, t + 1])
        dh = dhs[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * cs[:, t] * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            dh * tc * o * (1.0 - o),
        ], axis=1)
        dz_all[:, t] = dz
        dc_next = dc * f
        dh_next = dz @ W_hh
    flat_dz = dz_all.reshape(B * T, 4 * H)
    dW_ih = flat_dz.T @ x.reshape(B * T, -1)
    dW_hh = flat_dz.T @ hs[:, :-1].reshape(B * T, H)
    db = flat_dz.sum(axis=0)
    dx = dz_all @ W_ih
    return dx, dW_ih, dW_hh, db


def lstm_forward(x, layers, dropout_prob=0.0, rng=None, train=False):
    """Run a stack of LSTM layers.

    Args:
        x: (batch, time, features) input, already free of NaNs.
        layers: list of dicts with keys ``W_ih``, ``W_hh``, ``b``.
        dropout_prob: dropout between stacked layers (never after the last).

    Returns:
        Hidden states of the top layer, shape (batch, time, hidden), and a cache.
    """
    if x.ndim != 3:
        raise ShapeError(f"lstm: expected a (batch, time, features) array, got shape {x.shape}")
    caches = []
    h = x
    for depth, p in enumerate(layers):
        h, layer_cache = lstm_layer_forward(h, p["W_ih"], p["W_hh"], p["b"])
        drop_cache = None
        if depth < len(layers) - 1:
            h, drop_cache = dropout_forward(h, dropout_prob, rng, train)
        caches.append((layer_cache, drop_cache))
    return h, caches


def lstm_backward(dhs, caches):
    grads = [None] * len(caches)
    d = dhs
    for depth in reversed(range(len(caches))):
        layer_cache, drop_cache = caches[depth]
        d = dropout_backward(d, drop_cache)
        d, dW_ih, dW_hh, db = lstm_layer_backward(d, layer_cache)
        grads[depth] = {"W_ih": dW_ih, "W_hh": dW_hh, "b": db}
    return d, grads
