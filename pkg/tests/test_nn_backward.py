"""Gradient correctness: analytic BPTT vs central finite differences.

The finite-difference oracle lives in helpers.py and never touches the
analytic backward pass, so the two routes are independent.
"""

import numpy as np
import pytest

from helpers import max_rel_error, numeric_gradients, relu_safe
from relearn_hvac.nn import Dense, LSTM, LayerStack
from relearn_hvac.nn.losses import stack_backward

TOL = 1e-4


def _random_dense_stack(rng, activation):
    sizes = [int(rng.integers(2, 5)) for _ in range(3)]
    layers = [
        Dense(sizes[0], sizes[1], activation, rng),
        Dense(sizes[1], sizes[2], activation, rng),
        Dense(sizes[2], 1, "sigmoid" if activation == "sigmoid" else "identity", rng),
    ]
    # Nonzero biases exercise the bias gradients too.
    for layer in layers:
        layer.b = rng.normal(scale=0.3, size=layer.b.shape)
    return LayerStack(layers)


def _random_lstm_stack(rng):
    m = int(rng.integers(2, 5))
    n = int(rng.integers(2, 5))
    layers = [Dense(m, m, "tanh", rng), LSTM(m, n, rng), Dense(n, 1, "identity", rng)]
    layers[-1].b = rng.normal(scale=0.3, size=1)
    return LayerStack(layers)


def _check_stack(stack, rng, loss, seq_len):
    batch = int(rng.integers(2, 4))
    x = rng.normal(size=(batch, seq_len, stack.in_size))
    if loss == "bce":
        y = rng.integers(0, 2, size=batch).astype(float)
    else:
        y = rng.normal(size=batch)
    if not relu_safe(stack, x):
        return None
    _, analytic = stack_backward(stack, x, y, loss)
    numeric = numeric_gradients(stack, x, y, loss)
    return max_rel_error(analytic, numeric)


@pytest.mark.parametrize("activation", ["relu", "sigmoid", "tanh"])
@pytest.mark.parametrize("loss", ["mse", "bce"])
def test_dense_gradients_random(activation, loss):
    rng = np.random.default_rng(hash((activation, loss)) % 2**32)
    checked = 0
    attempts = 0
    while checked < 20 and attempts < 200:
        attempts += 1
        stack = _random_dense_stack(rng, activation)
        if loss == "bce" and stack.layers[-1].activation != "sigmoid":
            stack.layers[-1].activation = "sigmoid"
        err = _check_stack(stack, rng, loss, seq_len=int(rng.integers(1, 4)))
        if err is None:
            continue
        assert err < TOL, f"relative error {err} on instance {checked}"
        checked += 1
    assert checked == 20


@pytest.mark.parametrize("loss", ["mse", "bce"])
def test_lstm_gradients_random(loss):
    rng = np.random.default_rng(hash(("lstm", loss)) % 2**32)
    checked = 0
    attempts = 0
    while checked < 20 and attempts < 200:
        attempts += 1
        stack = _random_lstm_stack(rng)
        if loss == "bce":
            stack.layers[-1].activation = "sigmoid"
        err = _check_stack(stack, rng, loss, seq_len=int(rng.integers(2, 7)))
        if err is None:
            continue
        assert err < TOL, f"relative error {err} on instance {checked}"
        checked += 1
    assert checked == 20


def test_scalar_linear_regression_gradient():
    # Single weight, identity activation, one sample: L = (w*x - t)^2 with
    # x=1, w=1, t=0 gives dL/dw = 2 exactly.
    layer = Dense(1, 1, "identity")
    layer.W = np.array([[1.0]])
    stack = LayerStack([layer])
    loss, grads = stack_backward(stack, np.array([[1.0]]), np.array([0.0]), "mse")
    assert loss == 1.0
    assert grads[0]["W"][0, 0] == 2.0


def test_all_zero_network_zero_gradients():
    stack = LayerStack([Dense(2, 3, "relu"), LSTM(3, 2), Dense(2, 1, "identity")])
    x = np.zeros((2, 4, 2))
    _, grads = stack_backward(stack, x, np.zeros(2), "mse")
    for layer_grads in grads:
        for g in layer_grads.values():
            assert np.array_equal(g, np.zeros_like(g))


def test_frozen_layers_yield_none():
    rng = np.random.default_rng(3)
    stack = LayerStack(
        [Dense(2, 3, "tanh", rng), LSTM(3, 2, rng), Dense(2, 1, "identity", rng)],
        trainable=[False, True, False],
    )
    x = rng.normal(size=(2, 3, 2))
    _, grads = stack_backward(stack, x, rng.normal(size=2), "mse")
    assert grads[0] is None and grads[2] is None
    assert grads[1] is not None
    # The trainable layer's gradients are still exact.
    numeric = numeric_gradients(stack, x, rng.normal(size=2), "mse")
    # recompute analytic on the same targets used for numeric
    y = rng.normal(size=2)
    _, analytic = stack_backward(stack, x, y, "mse")
    numeric = numeric_gradients(stack, x, y, "mse")
    err = max_rel_error([None, analytic[1], None], [None, numeric[1], None])
    assert err < TOL


def test_two_stacked_lstms_gradients():
    rng = np.random.default_rng(11)
    stack = LayerStack([LSTM(3, 4, rng), LSTM(4, 3, rng), Dense(3, 1, "identity", rng)])
    x = rng.normal(size=(2, 5, 3))
    y = rng.normal(size=2)
    _, analytic = stack_backward(stack, x, y, "mse")
    numeric = numeric_gradients(stack, x, y, "mse")
    assert max_rel_error(analytic, numeric) < TOL
