"""Dynamics models: architectures, training loops, and prediction helpers.

Three models share the same input (six 30-minute steps of the eight scaled
telemetry columns) and predict the next interval:

- heating: hot-water energy, trained only on valve-on intervals
- valve:   probability the heating valve is on
- cooling: chilled-water energy

Each is a stack of relu feature layers, two LSTM layers, and one linear
output unit (sigmoid for the valve). Warm-start retraining freezes every
dense layer bit-for-bit and lets only the LSTM layers move.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, InputError, SchemaError
from .nn import Dense, LSTM, LayerStack, Optimizer
from .nn.losses import loss_and_grad, stack_backward
from .pipeline import COLUMNS, LOOKBACK, unscale_values

log = logging.getLogger(__name__)

N_FEATURES = len(COLUMNS)

MODEL_KINDS = ("heating", "valve", "cooling")

# (dense layer count, dense width, lstm layer count, lstm width, head act, loss)
ARCHITECTURES = {
    "heating": (6, 16, 2, 4, "identity", "mse"),
    "valve": (4, 16, 2, 8, "sigmoid", "bce"),
    "cooling": (6, 16, 2, 8, "identity", "mse"),
}

TARGET_COLUMNS = {"heating": "hwe", "cooling": "cwe", "valve": None}


def build_model(kind, rng, n_features=N_FEATURES):
    """Fresh stack for one of the three model kinds."""
    if kind not in ARCHITECTURES:
        raise InputError(f"unknown model kind {kind!r}")
    n_dense, dense_w, n_lstm, lstm_w, head_act, _ = ARCHITECTURES[kind]
    layers = []
    width = n_features
    for _ in range(n_dense):
        layers.append(Dense(width, dense_w, "relu", rng))
        width = dense_w
    for _ in range(n_lstm):
        layers.append(LSTM(width, lstm_w, rng))
        width = lstm_w
    layers.append(Dense(width, 1, head_act, rng))
    return LayerStack(layers)


def model_loss(kind):
    return ARCHITECTURES[kind][5]


def check_architecture(stack, kind):
    """Validate a loaded checkpoint against the expected layout."""
    n_dense, dense_w, n_lstm, lstm_w, head_act, _ = ARCHITECTURES[kind]
    kinds = [layer.kind for layer in stack.layers]
    expected = ["dense"] * n_dense + ["lstm"] * n_lstm + ["dense"]
    if kinds != expected:
        raise SchemaError(f"layer layout {kinds} does not match a {kind} model")
    for layer in stack.layers[:n_dense]:
        if layer.out_size != dense_w or layer.activation != "relu":
            raise SchemaError(f"{kind} feature layers must be relu width {dense_w}")
    for layer in stack.layers[n_dense:n_dense + n_lstm]:
        if layer.hidden_size != lstm_w:
            raise SchemaError(f"{kind} LSTM width must be {lstm_w}")
    head = stack.layers[-1]
    if head.out_size != 1 or head.activation != head_act:
        raise SchemaError(f"{kind} head must be one {head_act} unit")
    return stack


@dataclass
class TrainConfig:
    base_lr: float = 0.001
    max_epochs: int = 60
    patience: int = 8
    batch_size: int = 32
    val_fraction: float = 0.2
    freeze_dense: bool = False

    def __post_init__(self):
        if self.max_epochs < 0 or self.patience < 1 or self.batch_size < 1:
            raise ConfigurationError("bad training budget")
        if not (0.0 < self.val_fraction < 1.0):
            raise ConfigurationError("val_fraction must be in (0, 1)")


@dataclass
class TrainResult:
    model: LayerStack
    train_losses: list
    val_losses: list
    best_epoch: int


class EarlyStopper:
    """Keep the best validation loss; stop after `patience` non-improvements."""

    def __init__(self, patience):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch, val_loss):
        """Record an epoch. Returns True when training should stop."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def _epoch_loss(stack, inputs, targets, loss, batch_size=256):
    total, count = 0.0, 0
    for start in range(0, len(targets), batch_size):
        x = inputs[start:start + batch_size]
        y = targets[start:start + batch_size]
        out = stack.forward(x)[:, 0]
        value, _ = loss_and_grad(loss, out, y)
        total += value * len(y)
        count += len(y)
    return total / count


def train_model(model, dataset, cfg, rng, loss="mse"):
    """Mini-batch Adam with a linear LR schedule and early stopping.

    Works on a copy: the input model is never mutated. The validation split
    is the chronological tail of the dataset. Returns the checkpoint with
    the lowest validation loss seen.
    """
    if len(dataset) == 0:
        raise InputError("cannot train on an empty dataset")
    work = model.clone()
    if cfg.freeze_dense:
        work.trainable = [layer.kind != "dense" for layer in work.layers]
    if cfg.max_epochs == 0:
        return TrainResult(work, [], [], 0)
    n = len(dataset)
    n_val = max(1, int(round(n * cfg.val_fraction)))
    if n_val >= n:
        n_val = n - 1
    if n_val < 1:
        raise InputError("dataset too small for a validation split")
    train_x, val_x = dataset.inputs[: n - n_val], dataset.inputs[n - n_val:]
    train_y, val_y = dataset.targets[: n - n_val], dataset.targets[n - n_val:]
    batches = int(np.ceil(len(train_y) / cfg.batch_size))
    opt = Optimizer(work, cfg.base_lr, total_steps=cfg.max_epochs * batches)
    stopper = EarlyStopper(cfg.patience)
    best = work.clone()
    train_losses, val_losses = [], []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(train_y))
        running = 0.0
        for b in range(batches):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            value, grads = stack_backward(work, train_x[idx], train_y[idx], loss)
            opt.step(grads)
            running += value * len(idx)
        train_losses.append(running / len(train_y))
        val_losses.append(_epoch_loss(work, val_x, val_y, loss))
        improved = val_losses[-1] < stopper.best
        stop = stopper.update(epoch, val_losses[-1])
        if improved:
            best = work.clone()
        if stop:
            break
    best.trainable = list(work.trainable)
    return TrainResult(best, train_losses, val_losses, stopper.best_epoch)


def warm_start_retrain(model, dataset, cfg, rng, loss="mse"):
    """Retrain from existing parameters with every dense layer frozen."""
    return train_model(model, dataset, replace(cfg, freeze_dense=True), rng, loss)


def predict_scaled(model, sequences):
    """Batch predictions in scaled space, clamped at zero from below.

    sequences: (n, lookback, features) or a single (lookback, features).
    """
    x = np.asarray(sequences, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.shape[1] != LOOKBACK or x.shape[2] != model.in_size:
        raise InputError(
            f"expected (n, {LOOKBACK}, {model.in_size}) sequences, got {x.shape}"
        )
    out = np.maximum(model.forward(x)[:, 0], 0.0)
    return out[0] if single else out


def predict_energy(model, sequences, scaler, column):
    """Physical-unit predictions: scaled output inverted through the scaler."""
    scaled = predict_scaled(model, sequences)
    return unscale_values(scaled, column, scaler)


def predict_valve_prob(model, sequences):
    """Valve-on probability; the sigmoid head already bounds it to (0,1)."""
    x = np.asarray(sequences, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    out = model.forward(x)[:, 0]
    return out[0] if single else out


def predict_valve(model, sequences, threshold=0.5):
    """(on, probability); on means probability >= threshold."""
    prob = predict_valve_prob(model, sequences)
    return prob >= threshold, prob
