"""Small deterministic neural network engine in float64.

Supports 3x3 "same" convolutions with ReLU, 2x2 max pooling and dense
layers (ReLU on every dense layer except the last). Every weighted layer
owns two parameter groups, weights then biases, which are the unit the
neuromodulation controllers act on.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Conv",
    "MaxPool",
    "Dense",
    "ModelSpec",
    "Group",
    "ParamGroup",
    "Network",
    "ShapeError",
    "build_network",
    "forward",
    "loss_mse",
    "loss_cross_entropy",
    "loss_and_gradients",
    "backward",
    "accuracy",
    "one_hot",
]


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Conv:
    out_channels: int


@dataclass(frozen=True)
class MaxPool:
    pass


@dataclass(frozen=True)
class Dense:
    units: int


LayerSpec = Union[Conv, MaxPool, Dense]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    layers: tuple
    n_out: int
    input_shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))
        if not self.layers or not isinstance(self.layers[-1], Dense):
            raise ShapeError(f"{self.name}: final layer must be Dense")
        if self.layers[-1].units != self.n_out:
            raise ShapeError(f"{self.name}: final Dense has {self.layers[-1].units} units, n_out={self.n_out}")

    def shapes(self) -> list[tuple[tuple, tuple]]:
        """(input shape, output shape) per layer, excluding the batch axis."""
        out = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv):
                if len(shape) != 3:
                    raise ShapeError(f"layer {i}: Conv needs (C, H, W) input, got {shape}")
                new = (layer.out_channels, shape[1], shape[2])
            elif isinstance(layer, MaxPool):
                if len(shape) != 3 or shape[1] < 2 or shape[2] < 2:
                    raise ShapeError(f"layer {i}: MaxPool needs (C, H>=2, W>=2) input, got {shape}")
                new = (shape[0], shape[1] // 2, shape[2] // 2)
            elif isinstance(layer, Dense):
                new = (layer.units,)
            else:
                raise ShapeError(f"layer {i}: unknown layer {layer!r}")
            out.append((shape, new))
            shape = new
        return out

    @property
    def weighted_layer_count(self) -> int:
        return sum(1 for layer in self.layers if not isinstance(layer, MaxPool))


class Group(str, enum.Enum):
    WEIGHTS = "w"
    BIASES = "b"


@dataclass
class ParamGroup:
    layer_index: int
    group: Group
    values: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def key(self) -> tuple[int, Group]:
        return (self.layer_index, self.group)


class Network:
    def __init__(self, spec: ModelSpec, param_groups: list[ParamGroup]):
        self.spec = spec
        self.param_groups = param_groups
        self._shapes = spec.shapes()

    @property
    def weighted_layer_count(self) -> int:
        return self.spec.weighted_layer_count

    @property
    def params(self) -> list[np.ndarray]:
        return [g.values for g in self.param_groups]

    def set_params(self, values: Sequence[np.ndarray]) -> None:
        for g, v in zip(self.param_groups, values):
            if v.shape != g.values.shape:
                raise ShapeError(f"group {g.key}: shape {v.shape} != {g.values.shape}")
            g.values = v

    def copy(self) -> Network:
        return Network(self.spec, [ParamGroup(g.layer_index, g.group, g.values.copy())
                                   for g in self.param_groups])

    def __repr__(self):
        return f"Network({self.spec.name!r}, groups={len(self.param_groups)})"


def build_network(spec: ModelSpec, seed: int) -> Network:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    groups = []
    wl = 0
    for layer, (in_shape, out_shape) in zip(spec.layers, spec.shapes()):
        if isinstance(layer, Conv):
            c = in_shape[0]
            w_shape = (layer.out_channels, c, 3, 3)
            fan_in, fan_out = c * 9, layer.out_channels * 9
            n_b = layer.out_channels
        elif isinstance(layer, Dense):
            d_in = int(np.prod(in_shape))
            w_shape = (d_in, layer.units)
            fan_in, fan_out = d_in, layer.units
            n_b = layer.units
        else:
            continue
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        groups.append(ParamGroup(wl, Group.WEIGHTS, rng.uniform(-limit, limit, size=w_shape)))
        groups.append(ParamGroup(wl, Group.BIASES, np.zeros(n_b)))
        wl += 1
    return Network(spec, groups)


# --- layer kernels -------------------------------------------------------

def _conv_forward(x, w, b):
    n, c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))  # n, c, h, w, 3, 3
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * wd, c * 9)
    o = w.shape[0]
    out = cols @ w.reshape(o, c * 9).T + b
    return out.reshape(n, h, wd, o).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, x_shape, cols, w):
    n, c, h, wd = x_shape
    o = w.shape[0]
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, o)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(o, c * 9)).reshape(n, h, wd, c, 3, 3)
    dxp = np.zeros((n, c, h + 2, wd + 2))
    for ki in range(3):
        for kj in range(3):
            dxp[:, :, ki:ki + h, kj:kj + wd] += dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def _pool_forward(x):
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    win = (x[:, :, :2 * h2, :2 * w2].reshape(n, c, h2, 2, w2, 2)
           .transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h2, w2, 4))
    # argmax returns the first maximum: ties go to the lowest window index
    idx = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _pool_backward(dout, x_shape, idx):
    n, c, h, w = x_shape
    h2, w2 = h // 2, w // 2
    dwin = np.zeros((n, c, h2, w2, 4))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :, :2 * h2, :2 * w2] = (dwin.reshape(n, c, h2, w2, 2, 2)
                                  .transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h2, 2 * w2))
    return dx


def _run(net: Network, x: np.ndarray, keep: bool):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1:] != net.spec.input_shape:
        raise ShapeError(f"batch shape {x.shape[1:]} does not match model input {net.spec.input_shape}")
    caches = []
    gi = 0
    last = len(net.spec.layers) - 1
    for i, layer in enumerate(net.spec.layers):
        if isinstance(layer, Conv):
            w, b = net.param_groups[gi].values, net.param_groups[gi + 1].values
            z, cols = _conv_forward(x, w, b)
            caches.append(("conv", gi, x.shape, cols, z > 0))
            x = np.maximum(z, 0.0)
            gi += 2
        elif isinstance(layer, MaxPool):
            out, idx = _pool_forward(x)
            caches.append(("pool", None, x.shape, idx, None))
            x = out
        else:
            w, b = net.param_groups[gi].values, net.param_groups[gi + 1].values
            flat = x.reshape(x.shape[0], -1)
            z = flat @ w + b
            relu = i != last
            caches.append(("dense", gi, x.shape, flat, (z > 0) if relu else None))
            x = np.maximum(z, 0.0) if relu else z
            gi += 2
        if not keep:
            caches.clear()
    return x, caches


def forward(net: Network, batch: np.ndarray) -> np.ndarray:
    """Logits of shape (batch, n_out)."""
    return _run(net, batch, keep=False)[0]


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _as_onehot(targets, n_out):
    targets = np.asarray(targets)
    if targets.ndim == 1:
        return one_hot(targets, n_out)
    return targets.astype(np.float64)


def loss_mse(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean over samples of the summed squared error."""
    t = _as_onehot(targets, logits.shape[1])
    if t.shape != logits.shape:
        raise ShapeError(f"targets {t.shape} vs logits {logits.shape}")
    return float(np.sum((logits - t) ** 2) / logits.shape[0])


def _log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def loss_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> float:
    t = _as_onehot(targets, logits.shape[1])
    if t.shape != logits.shape:
        raise ShapeError(f"targets {t.shape} vs logits {logits.shape}")
    return float(-np.sum(t * _log_softmax(logits)) / logits.shape[0])


def loss_and_gradients(net: Network, batch: np.ndarray, targets: np.ndarray,
                       loss_kind: str = "cross_entropy"):
    """Return (loss, gradients aligned with ``net.param_groups``, logits)."""
    logits, caches = _run(net, batch, keep=True)
    n = logits.shape[0]
    t = _as_onehot(targets, logits.shape[1])
    if t.shape != logits.shape:
        raise ShapeError(f"targets {t.shape} vs logits {logits.shape}")
    if loss_kind == "cross_entropy":
        logp = _log_softmax(logits)
        loss = float(-np.sum(t * logp) / n)
        d = (np.exp(logp) * t.sum(axis=1, keepdims=True) - t) / n
    elif loss_kind == "mse":
        diff = logits - t
        loss = float(np.sum(diff ** 2) / n)
        d = 2.0 * diff / n
    else:
        raise ValueError(f"unknown loss {loss_kind!r}")

    grads: list = [None] * len(net.param_groups)
    for kind, gi, x_shape, saved, mask in reversed(caches):
        if kind == "dense":
            if mask is not None:
                d = d * mask
            w = net.param_groups[gi].values
            grads[gi] = saved.T @ d
            grads[gi + 1] = d.sum(axis=0)
            d = (d @ w.T).reshape(x_shape)
        elif kind == "conv":
            d = d * mask
            d, grads[gi], grads[gi + 1] = _conv_backward(d, x_shape, saved, net.param_groups[gi].values)
        else:
            d = _pool_backward(d, x_shape, saved)
    return loss, grads, logits


def backward(net: Network, batch: np.ndarray, targets: np.ndarray,
             loss_kind: str = "cross_entropy") -> list[np.ndarray]:
    return loss_and_gradients(net, batch, targets, loss_kind)[1]


def accuracy(net: Network, inputs: np.ndarray, labels: np.ndarray, batch_size: int = 500) -> float:
    labels = np.asarray(labels)
    if labels.shape[0] == 0:
        raise ValueError("accuracy of an empty dataset")
    correct = 0
    for s in range(0, labels.shape[0], batch_size):
        pred = np.argmax(forward(net, inputs[s:s + batch_size]), axis=1)
        correct += int(np.sum(pred == labels[s:s + batch_size]))
    return correct / labels.shape[0]
