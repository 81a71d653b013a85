"""Minimal float64 neural-network engine: dense + LSTM layers, BPTT, Adam."""

from .layers import (
    ACTIVATIONS,
    Dense,
    LSTM,
    LSTM_PARAM_NAMES,
    LayerStack,
    dense_forward,
    lstm_cell_forward,
    sigmoid,
    stack_forward,
)
from .losses import (
    BCE_EPS,
    bce_grad,
    bce_loss,
    loss_and_grad,
    mse_grad,
    mse_loss,
    stack_backward,
)
from .optim import Optimizer, clip_grad_norm, lr_schedule
from .serialize import (
    load_stack,
    params_checksum,
    save_stack,
    stack_from_dict,
    stack_to_dict,
)

__all__ = [
    "ACTIVATIONS",
    "BCE_EPS",
    "Dense",
    "LSTM",
    "LSTM_PARAM_NAMES",
    "LayerStack",
    "Optimizer",
    "bce_grad",
    "bce_loss",
    "clip_grad_norm",
    "dense_forward",
    "load_stack",
    "loss_and_grad",
    "lr_schedule",
    "lstm_cell_forward",
    "mse_grad",
    "mse_loss",
    "params_checksum",
    "save_stack",
    "sigmoid",
    "stack_backward",
    "stack_forward",
    "stack_from_dict",
    "stack_to_dict",
]
