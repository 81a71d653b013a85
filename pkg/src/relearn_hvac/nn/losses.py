"""Scalar training losses and their gradients w.r.t. the predictions."""

from __future__ import annotations

import numpy as np

from ..errors import InputError, ShapeError

BCE_EPS = 1e-7

LOSSES = ("mse", "bce")


def _check(pred, target):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.size == 0:
        raise InputError("loss over an empty batch")
    if pred.shape != target.shape:
        raise ShapeError(f"prediction/target shapes differ: {pred.shape} vs {target.shape}")
    return pred, target


def mse_loss(pred, target):
    pred, target = _check(pred, target)
    diff = pred - target
    return float(np.mean(diff * diff))


def mse_grad(pred, target):
    pred, target = _check(pred, target)
    return 2.0 * (pred - target) / pred.size


def bce_loss(pred, target):
    """Binary cross-entropy on probabilities, clamped to [eps, 1-eps]."""
    pred, target = _check(pred, target)
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))


def bce_grad(pred, target):
    pred, target = _check(pred, target)
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return (-(target / p) + (1.0 - target) / (1.0 - p)) / pred.size


def loss_and_grad(name, pred, target):
    if name == "mse":
        return mse_loss(pred, target), mse_grad(pred, target)
    if name == "bce":
        return bce_loss(pred, target), bce_grad(pred, target)
    raise InputError(f"unknown loss {name!r}")


def stack_backward(stack, inputs, targets, loss="mse"):
    """Forward a batch, evaluate the loss, and run the full backward pass.

    Returns (loss_value, per-layer gradients). inputs is (batch, time,
    features) for sequence stacks or (batch, features) for dense stacks;
    targets is (batch,) and the stack must end in a single output unit.
    """
    out = stack.forward(inputs)
    if out.shape[-1] != 1:
        raise ShapeError("stack_backward expects a single output unit")
    pred = out[:, 0]
    value, d_pred = loss_and_grad(loss, pred, targets)
    grads = stack.backward(d_pred[:, None])
    return value, grads
