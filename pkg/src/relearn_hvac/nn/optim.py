"""Linear learning-rate schedule and an Adam/plain-gradient optimizer."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError, NumericError


def lr_schedule(step, total_steps, base_lr):
    """Linear decay base_lr * (1 - step/total), floored at zero.

    Steps past total_steps clamp to zero rather than going negative.
    """
    if total_steps <= 0:
        raise ConfigurationError("total_steps must be positive")
    if step < 0:
        raise ConfigurationError("step must be non-negative")
    frac = 1.0 - step / total_steps
    return base_lr * frac if frac > 0.0 else 0.0


def clip_grad_norm(grads, max_norm):
    """Scale a list of per-layer grad dicts so the global L2 norm <= max_norm.

    Returns the pre-clip norm. None entries (frozen layers) are skipped.
    """
    total = 0.0
    for layer_grads in grads:
        if layer_grads is None:
            continue
        for g in layer_grads.values():
            total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for layer_grads in grads:
            if layer_grads is None:
                continue
            for g in layer_grads.values():
                g *= scale
    return norm


class Optimizer:
    """Parameter updates for one LayerStack.

    method="adam" keeps first/second moment estimates per parameter and
    applies bias correction; method="sgd" subtracts lr * grad directly.
    schedule="linear" anneals the base rate to zero over total_steps;
    schedule="constant" keeps it fixed. The step counter advances once per
    step() call, including calls whose gradients are all zero.
    """

    def __init__(self, stack, base_lr, total_steps=None, method="adam",
                 schedule="linear", beta1=0.9, beta2=0.999, eps=1e-8):
        if method not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer method {method!r}")
        if schedule not in ("linear", "constant"):
            raise ConfigurationError(f"unknown schedule {schedule!r}")
        if schedule == "linear" and (total_steps is None or total_steps <= 0):
            raise ConfigurationError("linear schedule needs positive total_steps")
        self.stack = stack
        self.base_lr = float(base_lr)
        self.total_steps = total_steps
        self.method = method
        self.schedule = schedule
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self._m = {}
        self._v = {}
        if method == "adam":
            for idx, name, arr in stack.param_arrays():
                self._m[(idx, name)] = np.zeros_like(arr)
                self._v[(idx, name)] = np.zeros_like(arr)

    def current_lr(self):
        if self.schedule == "constant":
            return self.base_lr
        return lr_schedule(self.step_count, self.total_steps, self.base_lr)

    def step(self, grads):
        """Apply one update from per-layer grad dicts (None = frozen layer)."""
        if len(grads) != len(self.stack.layers):
            raise ConfigurationError("gradient list does not match the stack")
        # Validate everything before touching any parameter so a NaN aborts
        # the whole update, not half of it.
        for layer, layer_grads in zip(self.stack.layers, grads):
            if layer_grads is None:
                continue
            for name in layer.param_names:
                g = layer_grads[name]
                if not np.all(np.isfinite(g)):
                    raise NumericError(f"non-finite gradient for {name}")
        lr = self.current_lr()
        self.step_count += 1
        t = self.step_count
        for idx, (layer, layer_grads) in enumerate(zip(self.stack.layers, grads)):
            if layer_grads is None or not self.stack.trainable[idx]:
                continue
            for name in layer.param_names:
                param = getattr(layer, name)
                g = layer_grads[name]
                if self.method == "sgd":
                    param -= lr * g
                    continue
                m = self._m[(idx, name)]
                v = self._v[(idx, name)]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * (g * g)
                m_hat = m / (1.0 - self.beta1 ** t)
                v_hat = v / (1.0 - self.beta2 ** t)
                param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return lr
