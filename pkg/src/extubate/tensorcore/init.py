"""Seeded parameter initialisers."""

from __future__ import annotations

import numpy as np


def init_kaiming_normal(shape, fan_in: int, seed):
    """Gaussian with standard deviation ``sqrt(2 / fan_in)``."""
    if fan_in <= 0:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def init_uniform(shape, fan: int, seed):
    """Uniform in ``+-1/sqrt(fan)``; the usual LSTM / linear default."""
    if fan <= 0:
        raise ValueError(f"fan must be positive, got {fan}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(fan)
    return rng.uniform(-bound, bound, size=shape)


def init_uniform_lstm(shape, hidden_dim: int, seed):
    return init_uniform(shape, hidden_dim, seed)


def zeros(shape):
    return np.zeros(shape)
