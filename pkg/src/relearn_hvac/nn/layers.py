"""Dense and LSTM layers with hand-written backpropagation through time.

Everything runs in float64 on plain numpy arrays. Layers cache what their
backward pass needs during forward, so the usage pattern is always
forward -> backward on the same inputs. Parameter layout is fixed: a dense
layer owns W (out, in) and b (out,); an LSTM layer owns eight weight
matrices (input-side (n, m), hidden-side (n, n)) and four bias vectors,
one per gate in the order i, f, o, g.
"""

from __future__ import annotations

import numpy as np

from ..errors import InputError, ShapeError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")

LSTM_PARAM_NAMES = (
    "W_ix", "W_ih", "b_i",
    "W_fx", "W_fh", "b_f",
    "W_ox", "W_oh", "b_o",
    "W_gx", "W_gh", "b_g",
)


def sigmoid(x):
    # Split by sign so exp never overflows for large |x|.
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _apply_activation(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name, z, a):
    # Derivative expressed via cached pre-activation z or output a.
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


class Dense:
    """Affine layer y = act(W x + b), applied to the trailing axis.

    Accepts (batch, features) or (batch, time, features) input; the same
    weights are shared across time steps.
    """

    kind = "dense"
    param_names = ("W", "b")

    def __init__(self, in_size, out_size, activation="identity", rng=None):
        if activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {activation!r}")
        if in_size < 1 or out_size < 1:
            raise ShapeError("dense layer sizes must be positive")
        self.in_size = int(in_size)
        self.out_size = int(out_size)
        self.activation = activation
        if rng is None:
            self.W = np.zeros((out_size, in_size))
            self.b = np.zeros(out_size)
        else:
            # Uniform Glorot: +-sqrt(6 / (fan_in + fan_out)).
            limit = np.sqrt(6.0 / (in_size + out_size))
            self.W = rng.uniform(-limit, limit, size=(out_size, in_size))
            self.b = np.zeros(out_size)
        self._x = None
        self._z = None
        self._a = None

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_size:
            raise ShapeError(
                f"dense expects {self.in_size} input features, got {x.shape[-1]}"
            )
        z = x @ self.W.T + self.b
        a = _apply_activation(self.activation, z)
        self._x, self._z, self._a = x, z, a
        return a

    def backward(self, d_out):
        if self._x is None:
            raise InputError("backward called before forward")
        dz = d_out * _activation_grad(self.activation, self._z, self._a)
        flat_x = self._x.reshape(-1, self.in_size)
        flat_dz = dz.reshape(-1, self.out_size)
        self.grads = {"W": flat_dz.T @ flat_x, "b": flat_dz.sum(axis=0)}
        return dz @ self.W

    def params(self):
        return {"W": self.W, "b": self.b}

    def clone(self):
        other = Dense(self.in_size, self.out_size, self.activation)
        other.W = self.W.copy()
        other.b = self.b.copy()
        return other


class LSTM:
    """Standard LSTM over a (batch, time, features) sequence.

    Gates: i = sig(W_ix x + W_ih h + b_i), f and o alike, g = tanh(...),
    c_t = g * i + c_{t-1} * f, h_t = tanh(c_t) * o. Initial h and c are zero.
    """

    kind = "lstm"
    param_names = LSTM_PARAM_NAMES

    def __init__(self, in_size, hidden_size, rng=None):
        if in_size < 1 or hidden_size < 1:
            raise ShapeError("lstm layer sizes must be positive")
        self.in_size = int(in_size)
        self.hidden_size = int(hidden_size)
        n, m = hidden_size, in_size
        if rng is None:
            draw = lambda shape: np.zeros(shape)
        else:
            # Uniform +-1/sqrt(n), the usual recurrent-net default.
            limit = 1.0 / np.sqrt(n)
            draw = lambda shape: rng.uniform(-limit, limit, size=shape)
        for gate in "ifog":
            setattr(self, f"W_{gate}x", draw((n, m)))
            setattr(self, f"W_{gate}h", draw((n, n)))
            setattr(self, f"b_{gate}", np.zeros(n))
        # Forget-gate bias starts at 1 so early training does not flush state.
        if rng is not None:
            self.b_f = np.ones(n)
        self._cache = None

    # Stacked views: one (4n, m) matmul per step instead of four.
    def _stacked(self):
        wx = np.vstack([self.W_ix, self.W_fx, self.W_ox, self.W_gx])
        wh = np.vstack([self.W_ih, self.W_fh, self.W_oh, self.W_gh])
        bb = np.concatenate([self.b_i, self.b_f, self.b_o, self.b_g])
        return wx, wh, bb

    def step(self, x_t, h_prev, c_prev):
        """One cell update on (batch, m) input. Returns (h, c, cache)."""
        n = self.hidden_size
        wx, wh, bb = self._stacked()
        pre = x_t @ wx.T + h_prev @ wh.T + bb
        i = sigmoid(pre[:, :n])
        f = sigmoid(pre[:, n:2 * n])
        o = sigmoid(pre[:, 2 * n:3 * n])
        g = np.tanh(pre[:, 3 * n:])
        c = g * i + c_prev * f
        tc = np.tanh(c)
        h = tc * o
        return h, c, (x_t, h_prev, c_prev, i, f, o, g, tc)

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3:
            raise ShapeError("lstm input must be (batch, time, features)")
        if x.shape[-1] != self.in_size:
            raise ShapeError(
                f"lstm expects {self.in_size} input features, got {x.shape[-1]}"
            )
        batch, steps, _ = x.shape
        n = self.hidden_size
        h = np.zeros((batch, n))
        c = np.zeros((batch, n))
        out = np.empty((batch, steps, n))
        caches = []
        for t in range(steps):
            h, c, cache = self.step(x[:, t, :], h, c)
            out[:, t, :] = h
            caches.append(cache)
        self._cache = caches
        return out

    def backward(self, d_out):
        if self._cache is None:
            raise InputError("backward called before forward")
        caches = self._cache
        batch, steps = d_out.shape[0], len(caches)
        n, m = self.hidden_size, self.in_size
        wx, wh, _ = self._stacked()
        d_x = np.empty((batch, steps, m))
        d_wx = np.zeros((4 * n, m))
        d_wh = np.zeros((4 * n, n))
        d_b = np.zeros(4 * n)
        dh_next = np.zeros((batch, n))
        dc_next = np.zeros((batch, n))
        for t in range(steps - 1, -1, -1):
            x_t, h_prev, c_prev, i, f, o, g, tc = caches[t]
            dh = d_out[:, t, :] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc_next = dc * f
            # Pre-activation gradients through each gate nonlinearity.
            d_pre = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    do * o * (1.0 - o),
                    dg * (1.0 - g * g),
                ],
                axis=1,
            )
            d_wx += d_pre.T @ x_t
            d_wh += d_pre.T @ h_prev
            d_b += d_pre.sum(axis=0)
            d_x[:, t, :] = d_pre @ wx
            dh_next = d_pre @ wh
        self.grads = {
            "W_ix": d_wx[:n], "W_fx": d_wx[n:2 * n],
            "W_ox": d_wx[2 * n:3 * n], "W_gx": d_wx[3 * n:],
            "W_ih": d_wh[:n], "W_fh": d_wh[n:2 * n],
            "W_oh": d_wh[2 * n:3 * n], "W_gh": d_wh[3 * n:],
            "b_i": d_b[:n], "b_f": d_b[n:2 * n],
            "b_o": d_b[2 * n:3 * n], "b_g": d_b[3 * n:],
        }
        return d_x

    def params(self):
        return {name: getattr(self, name) for name in LSTM_PARAM_NAMES}

    def clone(self):
        other = LSTM(self.in_size, self.hidden_size)
        for name in LSTM_PARAM_NAMES:
            setattr(other, name, getattr(self, name).copy())
        return other


class LayerStack:
    """Ordered layers with a per-layer trainable mask.

    forward() feeds a (batch, time, features) sequence through every layer
    and returns the last time step's output; dense-only stacks may also take
    plain (batch, features) input.
    """

    def __init__(self, layers, trainable=None):
        if not layers:
            raise InputError("a stack needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            prev_out = prev.out_size if prev.kind == "dense" else prev.hidden_size
            nxt_in = nxt.in_size
            if prev_out != nxt_in:
                raise ShapeError(
                    f"layer sizes do not chain: {prev_out} -> {nxt_in}"
                )
        self.layers = list(layers)
        if trainable is None:
            trainable = [True] * len(layers)
        if len(trainable) != len(layers):
            raise ShapeError("trainable mask length must match layer count")
        self.trainable = [bool(t) for t in trainable]

    @property
    def in_size(self):
        return self.layers[0].in_size

    @property
    def out_size(self):
        last = self.layers[-1]
        return last.out_size if last.kind == "dense" else last.hidden_size

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        sequence = x.ndim == 3
        out = x
        for layer in self.layers:
            out = layer.forward(out)
        if not np.all(np.isfinite(out)):
            from ..errors import NumericError

            raise NumericError("non-finite values in forward pass")
        if sequence:
            return out[:, -1, :]
        return out

    def backward(self, d_last):
        """Backpropagate a gradient w.r.t. the final output.

        d_last matches forward()'s return shape. Returns a list parallel to
        the layers: a {name: grad} dict for trainable layers, None otherwise.
        """
        last = self.layers[-1]
        if last.kind == "dense":
            top_shape = last._z.shape
        else:
            batch = last._cache[0][0].shape[0]
            top_shape = (batch, len(last._cache), last.hidden_size)
        d = np.asarray(d_last, dtype=np.float64)
        # Expand to the full time grid when the stack ran on sequences: only
        # the last step feeds the loss.
        if len(top_shape) == 3 and d.ndim == 2:
            grid = np.zeros(top_shape)
            grid[:, -1, :] = d
            d = grid
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return [
            layer.grads if trainable else None
            for layer, trainable in zip(self.layers, self.trainable)
        ]

    def param_arrays(self):
        """Yield (layer_index, name, array) for every parameter, in order."""
        for idx, layer in enumerate(self.layers):
            for name in layer.param_names:
                yield idx, name, getattr(layer, name)

    def clone(self):
        return LayerStack(
            [layer.clone() for layer in self.layers], list(self.trainable)
        )


def dense_forward(x, layer):
    """Functional wrapper: run one dense layer on x."""
    return layer.forward(np.asarray(x, dtype=np.float64))


def lstm_cell_forward(x_t, h_prev, c_prev, layer):
    """One LSTM cell update on 1-D vectors. Returns (h, c)."""
    x_t = np.atleast_1d(np.asarray(x_t, dtype=np.float64))
    h_prev = np.atleast_1d(np.asarray(h_prev, dtype=np.float64))
    c_prev = np.atleast_1d(np.asarray(c_prev, dtype=np.float64))
    if x_t.shape[-1] != layer.in_size or h_prev.shape[-1] != layer.hidden_size:
        raise ShapeError("cell input sizes do not match the layer")
    h, c, _ = layer.step(x_t[None, :], h_prev[None, :], c_prev[None, :])
    return h[0], c[0]


def stack_forward(seq, stack):
    """Run a single (time, features) sequence; returns the final output vector."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2:
        raise ShapeError("stack_forward takes a (time, features) sequence")
    if seq.shape[0] < 1:
        raise InputError("empty sequence")
    return stack.forward(seq[None, :, :])[0]
