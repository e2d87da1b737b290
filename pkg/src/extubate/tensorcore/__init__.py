"""Minimal float64 array kernel with hand-derived gradients."""

from .conv import conv1d_causal_backward, conv1d_causal_forward
from .gradcheck import grad_check, numerical_grad, relative_error
from .init import init_kaiming_normal, init_uniform, init_uniform_lstm, zeros
from .layers import (
    ACTIVATIONS,
    activation_backward,
    activation_forward,
    batchnorm_backward,
    batchnorm_forward,
    dropout_backward,
    dropout_forward,
    leaky_relu,
    linear_backward,
    linear_forward,
    relu,
    sigmoid,
)
from .lstm import lstm_backward, lstm_forward, lstm_layer_backward, lstm_layer_forward

__all__ = [
    "ACTIVATIONS",
    "activation_backward",
    "activation_forward",
    "batchnorm_backward",
    "batchnorm_forward",
    "conv1d_causal_backward",
    "conv1d_causal_forward",
    "dropout_backward",
    "dropout_forward",
    "grad_check",
    "init_kaiming_normal",
    "init_uniform",
    "init_uniform_lstm",
    "leaky_relu",
    "linear_backward",
    "linear_forward",
    "lstm_backward",
    "lstm_forward",
    "lstm_layer_backward",
    "lstm_layer_forward",
    "numerical_grad",
    "relative_error",
    "relu",
    "sigmoid",
    "zeros",
]
