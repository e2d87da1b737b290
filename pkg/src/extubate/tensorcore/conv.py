"""Causal dilated 1-D convolution over (batch, channels, time) arrays.

Tap ``j`` of a kernel reads the input ``j * dilation`` steps in the past, so a
kernel ``[0, 1]`` delays the signal by one step. Computing the convolution on
a left-padded input and keeping the first ``T`` outputs is the same as padding
both sides by ``(k - 1) * dilation`` and chomping the right-hand surplus.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ShapeError


def _shifted_stack(x, k, dilation):
    B, C, T = x.shape
    xs = np.zeros((B, C, k, T))
    for j in range(k):
        s = j * dilation
        if s == 0:
            xs[:, :, j] = x
        elif s < T:
            xs[:, :, j, s:] = x[:, :, :T - s]
    return xs


def conv1d_causal_forward(x, W, b, dilation: int = 1):
    """Causal convolution; output length equals input length."""
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    if x.ndim != 3:
        raise ShapeError(f"conv1d: expected (batch, channels, time), got shape {x.shape}")
    c_out, c_in, k = W.shape
    if k < 1:
        raise ValueError("kernel size must be >= 1")
    if x.shape[1] != c_in:
        raise ShapeError(f"conv1d: expected {c_in} input channels, got {x.shape[1]}")
    if b.shape != (c_out,):
        raise ShapeError(f"conv1d: expected bias shape {(c_out,)}, got {b.shape}")
    xs = _shifted_stack(x, k, dilation)
    y = np.einsum("ocj,bcjt->bot", W, xs, optimize=True) + b[None, :, None]
    return y, (xs, W, dilation)


def conv1d_causal_backward(dy, cache):
    xs, W, dilation = cache
    k = W.shape[2]
    T = dy.shape[2]
    dW = np.einsum("bot,bcjt->ocj", dy, xs, optimize=True)
    db = dy.sum(axis=(0, 2))
    dxs = np.einsum("ocj,bot->bcjt", W, dy, optimize=True)
    dx = np.zeros((dy.shape[0], W.shape[1], T))
    for j in range(k):
        s = j * dilation
        if s == 0:
            dx += dxs[:, :, j]
        elif s < T:
            dx[:, :, :T - s] += dxs[:, :, j, s:]
    return dx, dW, db
