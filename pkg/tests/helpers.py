"""Shared test utilities: finite-difference gradient oracle and data builders."""

import numpy as np

from relearn_hvac.nn import LayerStack
from relearn_hvac.nn.losses import loss_and_grad


def stack_loss(stack, inputs, targets, loss):
    out = stack.forward(inputs)
    value, _ = loss_and_grad(loss, out[:, 0], targets)
    return value


def numeric_gradients(stack, inputs, targets, loss, h=1e-5):
    """Central finite differences of the loss w.r.t. every parameter.

    Independent of the analytic backward pass: only forward() is used.
    """
    grads = []
    for idx, layer in enumerate(stack.layers):
        layer_grads = {}
        for name in layer.param_names:
            arr = getattr(layer, name)
            g = np.zeros_like(arr)
            flat = arr.reshape(-1)
            gflat = g.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                up = stack_loss(stack, inputs, targets, loss)
                flat[k] = orig - h
                down = stack_loss(stack, inputs, targets, loss)
                flat[k] = orig
                gflat[k] = (up - down) / (2.0 * h)
            layer_grads[name] = g
        grads.append(layer_grads)
    return grads


def max_rel_error(analytic, numeric):
    """Worst relative error across two parallel grad-dict lists."""
    worst = 0.0
    for a_layer, n_layer in zip(analytic, numeric):
        if a_layer is None:
            continue
        for name, a in a_layer.items():
            n = n_layer[name]
            denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
            worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def relu_safe(stack, inputs, margin=1e-3):
    """True when no relu pre-activation sits within margin of its kink.

    Finite differences are invalid straddling a relu kink; instances that
    fail this check are redrawn rather than asserted.
    """
    x = np.asarray(inputs, dtype=np.float64)
    stack.forward(x)
    for layer in stack.layers:
        if layer.kind == "dense" and layer.activation == "relu":
            if np.min(np.abs(layer._z)) < margin:
                return False
    return True
