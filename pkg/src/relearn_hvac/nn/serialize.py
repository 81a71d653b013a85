"""Bit-exact JSON serialization for layer stacks.

Floats go through Python's repr (shortest round-trip form), so a
save -> load cycle reproduces every parameter bit for bit.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..errors import SchemaError
from .layers import Dense, LSTM, LSTM_PARAM_NAMES, LayerStack

FORMAT_NAME = "relearn-hvac-stack"
FORMAT_VERSION = 1


def stack_to_dict(stack, meta=None):
    layers = []
    for layer, trainable in zip(stack.layers, stack.trainable):
        entry = {"kind": layer.kind, "trainable": trainable}
        if layer.kind == "dense":
            entry.update(
                in_size=layer.in_size,
                out_size=layer.out_size,
                activation=layer.activation,
                W=layer.W.tolist(),
                b=layer.b.tolist(),
            )
        else:
            entry.update(in_size=layer.in_size, hidden_size=layer.hidden_size)
            for name in LSTM_PARAM_NAMES:
                entry[name] = getattr(layer, name).tolist()
        layers.append(entry)
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layers": layers,
        "meta": dict(meta or {}),
    }


def stack_from_dict(data):
    for field in ("format", "version", "layers"):
        if field not in data:
            raise SchemaError(f"checkpoint missing field {field!r}")
    if data["format"] != FORMAT_NAME:
        raise SchemaError(f"unknown checkpoint format {data['format']!r}")
    layers, trainable = [], []
    for entry in data["layers"]:
        kind = entry.get("kind")
        if kind == "dense":
            layer = Dense(entry["in_size"], entry["out_size"], entry["activation"])
            layer.W = np.asarray(entry["W"], dtype=np.float64)
            layer.b = np.asarray(entry["b"], dtype=np.float64)
        elif kind == "lstm":
            layer = LSTM(entry["in_size"], entry["hidden_size"])
            for name in LSTM_PARAM_NAMES:
                if name not in entry:
                    raise SchemaError(f"lstm layer missing parameter {name!r}")
                setattr(layer, name, np.asarray(entry[name], dtype=np.float64))
        else:
            raise SchemaError(f"unknown layer kind {kind!r}")
        layers.append(layer)
        trainable.append(bool(entry.get("trainable", True)))
    return LayerStack(layers, trainable), data.get("meta", {})


def save_stack(stack, path, meta=None):
    payload = json.dumps(stack_to_dict(stack, meta), sort_keys=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)


def load_stack(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return stack_from_dict(data)


def params_checksum(stack, kinds=None):
    """sha256 over raw parameter bytes, optionally restricted to layer kinds."""
    digest = hashlib.sha256()
    for idx, name, arr in stack.param_arrays():
        if kinds is not None and stack.layers[idx].kind not in kinds:
            continue
        digest.update(f"{idx}:{name}:{arr.shape}".encode())
        digest.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    return digest.hexdigest()
