"""
Bayesian dense network: Gaussian weight prior, MCMC posterior, predictive.

The posterior over the flat weight vector is sampled by random-walk
Metropolis or HMC (see `mcmc`). Chains get independent seeds spawned from
the master seed, run after one another, and are concatenated after their
warmup is dropped.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from . import mcmc
from .audio import ClassLabel
from .errors import DimensionMismatch, IoFailure
from .nn import (
    Activation,
    Likelihood,
    _backprop,
    data_loss_and_output_grad,
    layer_shapes,
    n_params,
    sigmoid,
    unflatten,
)

ENSEMBLE_VERSION = "bnn-v1"
HIST_BINS = 50
LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class BnnSpec:
    input_dim: int = 5
    hidden: Tuple[int, ...] = (5,)
    hidden_activation: Activation = Activation.TANH
    output_activation: Activation = Activation.SIGMOID
    prior_std: float = 1.0
    likelihood: Likelihood = Likelihood.BERNOULLI

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))
        object.__setattr__(self, "output_activation", Activation(self.output_activation))
        object.__setattr__(self, "likelihood", Likelihood(self.likelihood))
        if self.prior_std <= 0:
            raise ValueError("prior_std must be positive")
        if self.input_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer widths must be >= 1")

    @property
    def shapes(self) -> list:
        widths = list(self.hidden) + [1]
        acts = [self.hidden_activation] * len(self.hidden) + [self.output_activation]
        return layer_shapes(self.input_dim, widths, acts)

    @property
    def dim(self) -> int:
        return n_params(self.shapes)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden": list(self.hidden),
            "hidden_activation": self.hidden_activation.value,
            "output_activation": self.output_activation.value,
            "prior_std": self.prior_std,
            "likelihood": self.likelihood.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BnnSpec":
        return cls(**{**d, "hidden": tuple(d["hidden"])})


@dataclass(frozen=True)
class WeightSample:
    w: np.ndarray
    log_joint: float


@dataclass(frozen=True)
class PosteriorEnsemble:
    spec: BnnSpec
    draws: np.ndarray            # (S, D) in flatten order
    log_joint: np.ndarray        # (S,)
    chain_ids: np.ndarray        # (S,)
    chains: int
    acceptance_rate: float
    seed: int
    step_sizes: Tuple[float, ...] = ()
    sampler: str = "hmc"

    def __post_init__(self):
        if self.draws.shape[0] == 0:
            raise ValueError("an ensemble needs at least one draw")
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError("acceptance_rate must lie in [0, 1]")

    @property
    def samples(self) -> List[WeightSample]:
        return [WeightSample(w, float(lj)) for w, lj in zip(self.draws, self.log_joint)]

    def __len__(self):
        return self.draws.shape[0]

    def chain_draws(self) -> list:
        return [self.draws[self.chain_ids == c] for c in range(self.chains)]

    def chain_discrepancy(self) -> float:
        return mcmc.chain_mean_discrepancy(self.chain_draws())


@dataclass(frozen=True)
class MhConfig:
    steps: int = 20000
    warmup: int = 5000
    thin: int = 10
    step_size: float = 0.05
    chains: int = 4
    seed: int = 0


@dataclass(frozen=True)
class HmcConfig:
    draws: int = 500
    warmup: int = 500
    leapfrog_steps: int = 20
    step_size: float = 0.05
    chains: int = 4
    seed: int = 0
    thin: int = 1


# --------------------------------------------------------------------------
# log joint


def _check_data(spec: BnnSpec, x, y):
    x = np.asarray(x, dtype=np.float64).reshape(-1, spec.input_dim) if np.size(x) else \
        np.zeros((0, spec.input_dim))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} inputs but {y.shape[0]} labels")
    return x, y


def _check_w(spec: BnnSpec, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (spec.dim,):
        raise DimensionMismatch(f"weight vector has shape {w.shape}, spec needs ({spec.dim},)")
    return w


def log_prior(spec: BnnSpec, w) -> float:
    w = _check_w(spec, w)
    s2 = spec.prior_std ** 2
    return float(-0.5 * np.sum(w * w) / s2 - w.size * (0.5 * LOG_2PI + math.log(spec.prior_std)))


def log_joint_and_grad(spec: BnnSpec, w, x, y) -> Tuple[float, np.ndarray]:
    w = _check_w(spec, w)
    x, y = _check_data(spec, x, y)
    lp = log_prior(spec, w)
    g = -w / spec.prior_std ** 2
    if x.shape[0]:
        params = unflatten(w, spec.shapes)
        value, dz, pre, post = data_loss_and_output_grad(params, x, y, spec.likelihood)
        if spec.likelihood is Likelihood.BERNOULLI:
            # value = negative log likelihood
            lp -= value
            scale = 1.0
        else:
            # value = sum of squared residuals; unit-variance Gaussian
            lp -= 0.5 * value + 0.5 * x.shape[0] * LOG_2PI
            scale = 0.5
        grads = _backprop(params, dz, pre, post, 0.0)
        gflat = np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in grads.layers])
        g = g - scale * gflat
    return lp, g


def log_joint(spec: BnnSpec, w, x=None, y=None) -> float:
    """Log likelihood of (x, y) under weights w plus the log Gaussian prior."""
    if x is None:
        return log_prior(spec, w)
    return log_joint_and_grad(spec, w, x, y)[0]


# --------------------------------------------------------------------------
# sampling


def _chain_rngs(seed: int, chains: int) -> list:
    seq = np.random.SeedSequence(int(seed) & (2**128 - 1))
    return [np.random.default_rng(s) for s in seq.spawn(chains)]


def _initial_point(spec: BnnSpec, rng: np.random.Generator) -> np.ndarray:
    return 0.5 * spec.prior_std * rng.standard_normal(spec.dim)


def _combine(spec, results, chains, seed, sampler) -> PosteriorEnsemble:
    draws = np.concatenate([r.draws for r in results])
    lps = np.concatenate([r.log_prob for r in results])
    ids = np.concatenate([np.full(len(r.draws), c) for c, r in enumerate(results)])
    acc = sum(r.accepted for r in results) / max(1, sum(r.steps for r in results))
    return PosteriorEnsemble(spec, draws, lps, ids, chains, acc, seed,
                             tuple(r.step_size for r in results), sampler)


def sample_posterior_mh(spec: BnnSpec, x, y, cfg: MhConfig = MhConfig()) -> PosteriorEnsemble:
    x, y = _check_data(spec, x, y)
    if cfg.chains < 1:
        raise ValueError("need at least one chain")

    def target(w):
        return log_joint_and_grad(spec, w, x, y)[0]

    results = []
    for rng in _chain_rngs(cfg.seed, cfg.chains):
        x0 = _initial_point(spec, rng)
        results.append(mcmc.random_walk_metropolis(
            target, x0, cfg.steps, cfg.warmup, cfg.thin, cfg.step_size, rng))
    return _combine(spec, results, cfg.chains, cfg.seed, "mh")


def sample_posterior_hmc(spec: BnnSpec, x, y, cfg: HmcConfig = HmcConfig()) -> PosteriorEnsemble:
    x, y = _check_data(spec, x, y)
    if cfg.chains < 1:
        raise ValueError("need at least one chain")
    if cfg.draws < 1:
        raise ValueError("need at least one post-warmup draw")

    def target(w):
        return log_joint_and_grad(spec, w, x, y)

    results = []
    for rng in _chain_rngs(cfg.seed, cfg.chains):
        x0 = _initial_point(spec, rng)
        results.append(mcmc.hamiltonian_monte_carlo(
            target, x0, cfg.draws, cfg.warmup, cfg.leapfrog_steps, cfg.step_size, rng,
            thin=cfg.thin))
    return _combine(spec, results, cfg.chains, cfg.seed, "hmc")


# --------------------------------------------------------------------------
# prediction


@dataclass(frozen=True)
class PredictiveDistribution:
    draws: np.ndarray

    @property
    def mean(self) -> float:
        # clamp guards against summation rounding leaving [min, max]
        d = self.draws
        return float(np.clip(np.mean(d), d.min(), d.max()))

    def credible_interval(self, alpha: float = 0.9) -> Tuple[float, float]:
        """Central interval holding `alpha` of the draws, widened to contain the mean."""
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        lo, hi = np.quantile(self.draws, [(1 - alpha) / 2, (1 + alpha) / 2])
        m = self.mean
        return float(min(lo, m)), float(max(hi, m))


def predictive_draws(ensemble: PosteriorEnsemble, x) -> np.ndarray:
    """Network outputs for every kept draw, shape (S, n) (or (S,) for one input)."""
    spec = ensemble.spec
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != spec.input_dim:
        raise DimensionMismatch(f"input width {xb.shape[-1]} != BNN input {spec.input_dim}")
    w = ensemble.draws
    s = w.shape[0]
    a = np.broadcast_to(xb, (s,) + xb.shape)
    pos = 0
    for out, inp, act in spec.shapes:
        weight = w[:, pos:pos + out * inp].reshape(s, out, inp)
        pos += out * inp
        bias = w[:, pos:pos + out]
        pos += out
        z = np.einsum("sni,soi->sno", a, weight) + bias[:, None, :]
        if act is Activation.SIGMOID:
            a = sigmoid(z)
        elif act is Activation.TANH:
            a = np.tanh(z)
        elif act is Activation.RELU:
            a = np.maximum(z, 0.0)
        else:
            a = z
    out = a[..., 0]
    return out[:, 0] if single else out


def posterior_predictive(ensemble: PosteriorEnsemble, x) -> PredictiveDistribution:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("posterior_predictive takes one feature vector")
    return PredictiveDistribution(predictive_draws(ensemble, x))


def predict_class_bnn(pred: PredictiveDistribution, threshold: float = 0.5) -> Tuple[int, float]:
    """(1 if mean >= threshold else 0, width of the 90% interval)."""
    lo, hi = pred.credible_interval(0.9)
    return int(pred.mean >= threshold), hi - lo


def predict_proba(ensemble: PosteriorEnsemble, x) -> np.ndarray:
    return predictive_draws(ensemble, np.atleast_2d(x)).mean(axis=0)


# --------------------------------------------------------------------------
# per-class output histograms


@dataclass
class ClassHistogram:
    label: ClassLabel
    edges: np.ndarray
    counts: np.ndarray
    center: float


def output_distribution_by_class(ensemble: PosteriorEnsemble, x, labels: Sequence) -> list:
    """50-bin histograms over [0, 1] of pooled predictive draws, per class."""
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    draws = predictive_draws(ensemble, np.atleast_2d(x))
    labels = list(labels)
    out = []
    for label in ClassLabel:
        cols = [i for i, l in enumerate(labels) if l is label]
        if not cols:
            continue
        pooled = draws[:, cols].ravel()
        counts, _ = np.histogram(pooled, bins=edges)
        out.append(ClassHistogram(label, edges, counts, float(pooled.mean())))
    return out


def write_histogram_csv(path, hists: Sequence[ClassHistogram]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["class", "bin_lo", "bin_hi", "count"])
            for h in hists:
                for k, c in enumerate(h.counts):
                    w.writerow([h.label.token, f"{h.edges[k]:.2f}", f"{h.edges[k + 1]:.2f}", int(c)])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# bnn-v1 documents


def to_document(ensemble: PosteriorEnsemble, **metadata) -> dict:
    doc = {
        "version": ENSEMBLE_VERSION,
        "spec": ensemble.spec.to_dict(),
        "sampler": ensemble.sampler,
        "chains": ensemble.chains,
        "seed": ensemble.seed,
        "acceptance_rate": ensemble.acceptance_rate,
        "step_sizes": list(ensemble.step_sizes),
        "chain_ids": [int(c) for c in ensemble.chain_ids],
        "log_joint": [float(v) for v in ensemble.log_joint],
        "draws": [[float(v) for v in row] for row in ensemble.draws],
    }
    doc.update(metadata)
    return doc


def from_document(doc: dict) -> PosteriorEnsemble:
    if doc.get("version") != ENSEMBLE_VERSION:
        raise ValueError(f"expected a {ENSEMBLE_VERSION} document, got {doc.get('version')!r}")
    spec = BnnSpec.from_dict(doc["spec"])
    draws = np.array(doc["draws"], dtype=np.float64).reshape(-1, spec.dim)
    return PosteriorEnsemble(
        spec, draws, np.array(doc["log_joint"], dtype=np.float64),
        np.array(doc["chain_ids"], dtype=np.int64), int(doc["chains"]),
        float(doc["acceptance_rate"]), int(doc["seed"]),
        tuple(doc.get("step_sizes", ())), doc.get("sampler", "hmc"),
    )
