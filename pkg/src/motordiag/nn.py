"""
Dense feed-forward networks with hand-written reverse-mode gradients.

A network is an `MLPParams`: an ordered list of `Layer(weight, bias,
activation)` with weight shaped (out, in). Inputs are batches of row vectors,
shape (n, in). The flat parameter order is layer-major; inside a layer the
weight matrix comes first in row-major order, then the bias.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, LengthMismatch, NonFiniteLoss

MODEL_VERSION = "mlp-v1"


class Activation(enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    IDENTITY = "identity"


class Likelihood(enum.Enum):
    GAUSSIAN_SQUARED = "gaussian"
    BERNOULLI = "bernoulli"


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    # exp of a non-positive argument only, so no overflow for |z| > 30
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(z):
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def activate(kind: Activation, z):
    if kind is Activation.RELU:
        return np.maximum(z, 0.0)
    if kind is Activation.TANH:
        return np.tanh(z)
    if kind is Activation.SIGMOID:
        return sigmoid(z)
    return z


def activation_grad(kind: Activation, z, a):
    """Derivative of the activation at pre-activation z (a = activate(z))."""
    if kind is Activation.RELU:
        return (z > 0).astype(np.float64)
    if kind is Activation.TANH:
        return 1.0 - a * a
    if kind is Activation.SIGMOID:
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: Activation

    @property
    def shape(self) -> Tuple[int, int]:
        return self.weight.shape


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.0
    likelihood: Likelihood = Likelihood.GAUSSIAN_SQUARED

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("L2 strength must be non-negative")


class MLPParams:
    """Weights, biases and activation tags of a dense network."""

    def __init__(self, layers: Sequence[Layer]):
        layers = [
            Layer(np.asarray(l.weight, dtype=np.float64),
                  np.asarray(l.bias, dtype=np.float64).reshape(-1),
                  Activation(l.activation))
            for l in layers
        ]
        if not layers:
            raise ValueError("a network needs at least one layer")
        for k, l in enumerate(layers):
            if l.weight.ndim != 2 or l.bias.shape != (l.weight.shape[0],):
                raise DimensionMismatch(f"layer {k}: weight {l.weight.shape} vs bias {l.bias.shape}")
            if k and l.weight.shape[1] != layers[k - 1].weight.shape[0]:
                raise DimensionMismatch(
                    f"layer {k} expects {l.weight.shape[1]} inputs, "
                    f"previous layer gives {layers[k - 1].weight.shape[0]}"
                )
        self.layers: List[Layer] = layers

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def shapes(self) -> list:
        return [(l.weight.shape[0], l.weight.shape[1], l.activation) for l in self.layers]

    @property
    def size(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def __eq__(self, other):
        if not isinstance(other, MLPParams) or len(self.layers) != len(other.layers):
            return NotImplemented
        return all(
            a.activation is b.activation
            and np.array_equal(a.weight, b.weight)
            and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )

    def __repr__(self):
        dims = [self.input_dim] + [l.weight.shape[0] for l in self.layers]
        acts = ",".join(l.activation.value for l in self.layers)
        return f"MLPParams({'->'.join(map(str, dims))}; {acts})"


def zeros_like(params: MLPParams) -> MLPParams:
    return MLPParams([Layer(np.zeros_like(l.weight), np.zeros_like(l.bias), l.activation)
                      for l in params.layers])


def layer_shapes(input_dim: int, widths: Sequence[int], activations: Sequence) -> list:
    dims = [input_dim] + list(widths)
    return [(dims[k + 1], dims[k], Activation(activations[k])) for k in range(len(widths))]


def n_params(shapes) -> int:
    return sum(o * i + o for o, i, _ in shapes)


# --------------------------------------------------------------------------
# flat parameter vectors


def flatten(params: MLPParams) -> np.ndarray:
    parts = []
    for l in params.layers:
        parts.append(l.weight.ravel())
        parts.append(l.bias)
    return np.concatenate(parts)


def unflatten(vector, shapes) -> MLPParams:
    vector = np.asarray(vector, dtype=np.float64)
    if vector.ndim != 1 or vector.size != n_params(shapes):
        raise LengthMismatch(f"vector of length {vector.size}, shapes need {n_params(shapes)}")
    layers = []
    pos = 0
    for out, inp, act in shapes:
        w = vector[pos:pos + out * inp].reshape(out, inp).copy()
        pos += out * inp
        b = vector[pos:pos + out].copy()
        pos += out
        layers.append(Layer(w, b, Activation(act)))
    return MLPParams(layers)


def weight_mask(shapes) -> np.ndarray:
    """True at flat positions holding weights, False at biases."""
    return np.concatenate([
        np.concatenate([np.ones(o * i, dtype=bool), np.zeros(o, dtype=bool)])
        for o, i, _ in shapes
    ])


# --------------------------------------------------------------------------
# forward / loss / gradient


def _as_batch(params: MLPParams, x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise DimensionMismatch(f"input width {x.shape[-1]} != network input {params.input_dim}")
    return x, single


def _forward_trace(params: MLPParams, x: np.ndarray):
    pre, post = [], [x]
    a = x
    for l in params.layers:
        z = a @ l.weight.T + l.bias
        a = activate(l.activation, z)
        pre.append(z)
        post.append(a)
    return pre, post


def forward(params: MLPParams, x) -> np.ndarray:
    """Network output for one input vector or a batch of row vectors."""
    x, single = _as_batch(params, x)
    a = x
    for l in params.layers:
        a = activate(l.activation, a @ l.weight.T + l.bias)
    return a[0] if single else a


def output_preactivation(params: MLPParams, x) -> np.ndarray:
    x, single = _as_batch(params, x)
    pre, _ = _forward_trace(params, x)
    return pre[-1][0] if single else pre[-1]


def _targets(y, n: int, out: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(n, -1)
    if y.shape[1] != out:
        raise DimensionMismatch(f"targets have width {y.shape[1]}, network emits {out}")
    return y


def _penalty(params: MLPParams, lam: float) -> float:
    if not lam:
        return 0.0
    return lam * sum(float(np.sum(l.weight ** 2)) for l in params.layers)


def data_loss_and_output_grad(params: MLPParams, x, y, likelihood: Likelihood):
    """Data term of the loss and its gradient w.r.t. the output pre-activation."""
    x, _ = _as_batch(params, x)
    pre, post = _forward_trace(params, x)
    y = _targets(y, x.shape[0], params.output_dim)
    z, out = pre[-1], post[-1]
    last = params.layers[-1].activation
    if likelihood is Likelihood.BERNOULLI:
        if last is not Activation.SIGMOID:
            raise ValueError("Bernoulli likelihood needs a sigmoid output layer")
        value = float(np.sum(softplus(z) - y * z))
        dz = out - y
    else:
        r = out - y
        value = float(np.sum(r * r))
        dz = 2.0 * r * activation_grad(last, z, out)
    return value, dz, pre, post


def loss(params: MLPParams, x, y, cfg: LossConfig = LossConfig()) -> float:
    """Sum over examples of the data term plus lam * sum of squared weights.

    Biases are not penalised.
    """
    if np.asarray(x).shape[0] == 0:
        raise ValueError("loss needs at least one example")
    value, _, _, _ = data_loss_and_output_grad(params, x, y, cfg.likelihood)
    return value + _penalty(params, cfg.lam)


def _backprop(params: MLPParams, dz, pre, post, lam: float) -> MLPParams:
    grads = [None] * len(params.layers)
    for k in range(len(params.layers) - 1, -1, -1):
        l = params.layers[k]
        gw = dz.T @ post[k]
        if lam:
            gw += 2.0 * lam * l.weight
        gb = dz.sum(axis=0)
        grads[k] = Layer(gw, gb, l.activation)
        if k:
            below = params.layers[k - 1]
            da = dz @ l.weight
            dz = da * activation_grad(below.activation, pre[k - 1], post[k])
    return MLPParams(grads)


def loss_and_grad(params: MLPParams, x, y, cfg: LossConfig = LossConfig()):
    value, dz, pre, post = data_loss_and_output_grad(params, x, y, cfg.likelihood)
    value += _penalty(params, cfg.lam)
    if not np.isfinite(value):
        raise NonFiniteLoss(f"loss evaluated to {value}")
    return value, _backprop(params, dz, pre, post, cfg.lam)


def grad(params: MLPParams, x, y, cfg: LossConfig = LossConfig()) -> MLPParams:
    """Exact gradient of `loss`, shaped like `params`."""
    return loss_and_grad(params, x, y, cfg)[1]


# --------------------------------------------------------------------------
# mlp-v1 documents


def to_document(params: MLPParams, **metadata) -> dict:
    doc = {
        "version": MODEL_VERSION,
        "layers": [
            {"out": int(o), "in": int(i), "activation": a.value} for o, i, a in params.shapes
        ],
        "weights": [float(v) for v in flatten(params)],
    }
    doc.update(metadata)
    return doc


def from_document(doc: dict) -> MLPParams:
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"expected a {MODEL_VERSION} document, got {doc.get('version')!r}")
    shapes = [(l["out"], l["in"], Activation(l["activation"])) for l in doc["layers"]]
    return unflatten(np.array(doc["weights"], dtype=np.float64), shapes)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
