"""Deterministic deep classifier: input -> 180 -> 60 -> 60 -> 30 -> 1."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss
from .nn import (
    Activation,
    Layer,
    Likelihood,
    LossConfig,
    MLPParams,
    forward,
    loss,
    loss_and_grad,
)

HIDDEN_WIDTHS = (180, 60, 60, 30)


class Optimizer(enum.Enum):
    SGD = "sgd"
    SGD_MOMENTUM = "sgd_momentum"


@dataclass(frozen=True)
class DnnTrainConfig:
    epochs: int = 300
    learning_rate: float = 1e-3
    lam: float = 0.0
    batch_size: int = 16
    seed: int = 0
    optimizer: Optimizer = Optimizer.SGD_MOMENTUM
    momentum: float = 0.9
    likelihood: Likelihood = Likelihood.BERNOULLI

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        object.__setattr__(self, "likelihood", Likelihood(self.likelihood))
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0 or self.lam < 0:
            raise ValueError("invalid training configuration")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "lam": self.lam,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "optimizer": self.optimizer.value,
            "momentum": self.momentum,
            "likelihood": self.likelihood.value,
        }


def build_dnn(input_dim: int = 2025, seed: int = 0,
              hidden: Sequence[int] = HIDDEN_WIDTHS) -> MLPParams:
    """He-initialised relu stack with a single sigmoid output; biases start at 0."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [input_dim] + list(hidden) + [1]
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        act = Activation.SIGMOID if k == len(dims) - 2 else Activation.RELU
        layers.append(Layer(w, np.zeros(fan_out), act))
    return MLPParams(layers)


def train_dnn(x, y, cfg: DnnTrainConfig = DnnTrainConfig(),
              params: Optional[MLPParams] = None) -> Tuple[MLPParams, List[float]]:
    """Mini-batch gradient descent on the summed loss.

    Each step uses the batch loss divided by the batch size, with the L2 term
    scaled by batch/n so one epoch sees it once. Returns the trained network
    and the full-set loss after each epoch (index 0 is the initial loss).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise DimensionMismatch("x must be (n, d) with one label per row")
    if params is None:
        params = build_dnn(x.shape[1], cfg.seed)
    if params.input_dim != x.shape[1]:
        raise DimensionMismatch(f"features have width {x.shape[1]}, network expects {params.input_dim}")

    rng = np.random.default_rng([cfg.seed & (2**64 - 1), 1])
    n = x.shape[0]
    full_cfg = LossConfig(cfg.lam, cfg.likelihood)
    weights = [[l.weight.copy(), l.bias.copy()] for l in params.layers]
    velocity = [[np.zeros_like(w), np.zeros_like(b)] for w, b in weights]
    mu = cfg.momentum if cfg.optimizer is Optimizer.SGD_MOMENTUM else 0.0
    acts = [l.activation for l in params.layers]

    def current() -> MLPParams:
        return MLPParams([Layer(w, b, a) for (w, b), a in zip(weights, acts)])

    history = [loss(params, x, y, full_cfg)]
    with np.errstate(over="ignore", invalid="ignore"):
        _epochs(cfg, x, y, n, rng, weights, velocity, mu, current, full_cfg, history)
    return current(), history


def _epochs(cfg, x, y, n, rng, weights, velocity, mu, current, full_cfg, history):
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            m = idx.size
            batch_cfg = LossConfig(cfg.lam * m / n, cfg.likelihood)
            _, g = loss_and_grad(current(), x[idx], y[idx], batch_cfg)
            step = cfg.learning_rate / m
            for (w, b), (vw, vb), gl in zip(weights, velocity, g.layers):
                np.multiply(gl.weight, step, out=gl.weight)
                vw *= mu
                vw -= gl.weight
                vb *= mu
                vb -= step * gl.bias
                w += vw
                b += vb
        epoch_loss = loss(current(), x, y, full_cfg)
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss("training diverged; lower the learning rate")
        history.append(epoch_loss)


def predict_dnn(params: MLPParams, x) -> np.ndarray:
    """Fault probability; a scalar for one vector, an array for a batch."""
    out = forward(params, x)
    return out[..., 0] if np.ndim(out) else out


def classify(prob, threshold: float = 0.5):
    """Binary verdict; an output of exactly `threshold` counts as a fault."""
    return (np.asarray(prob) >= threshold).astype(np.int64)
