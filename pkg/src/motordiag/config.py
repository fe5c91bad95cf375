"""
Run configuration: one JSON document, environment seed, command-line flags.

Precedence, lowest first: built-in defaults, MOTOR_DIAG_SEED (seed only),
the config file, explicit flags. Unknown keys anywhere are an error.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Tuple

from . import bnn, dnn, spectral
from .evaluation import EvalConfig
from .synth import SynthSpec

SEED_ENV = "MOTOR_DIAG_SEED"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSection:
    sample_rate_hz: int = 44100
    duration_s: float = 1.0
    base_hz: float = 120.0
    clips_per_class: int = 30
    noise_std: float = 0.01
    fundamental_amp: float = 0.2
    harmonic_decay: float = 0.6


@dataclass(frozen=True)
class FeatureSection:
    count: int = spectral.DEFAULT_FEATURES
    lo_hz: float = spectral.AUDIBLE_BAND[0]
    hi_hz: float = spectral.AUDIBLE_BAND[1]
    window_seconds: float = 1.0

    @property
    def band(self) -> Tuple[float, float]:
        return (self.lo_hz, self.hi_hz)


@dataclass(frozen=True)
class DnnSection:
    epochs: int = 300
    learning_rate: float = 1e-3
    lam: float = 0.0
    batch_size: int = 16
    optimizer: str = "sgd_momentum"
    momentum: float = 0.9
    likelihood: str = "bernoulli"


@dataclass(frozen=True)
class BnnSection:
    hidden: Tuple[int, ...] = (5,)
    prior_std: float = 1.0
    likelihood: str = "bernoulli"
    sampler: str = "hmc"
    chains: int = 4
    # hmc
    draws: int = 500
    warmup: int = 500
    leapfrog_steps: int = 20
    step_size: float = 0.05
    # random-walk metropolis
    mh_steps: int = 20000
    mh_warmup: int = 5000
    mh_thin: int = 10
    mh_step_size: float = 0.05


@dataclass(frozen=True)
class EvaluateSection:
    ratio: float = 0.8
    trials: int = 100
    dnn_features: int = spectral.DEFAULT_FEATURES
    bnn_features: int = 5


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    synth: SynthSection = field(default_factory=SynthSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    dnn: DnnSection = field(default_factory=DnnSection)
    bnn: BnnSection = field(default_factory=BnnSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)

    # ---- conversions to the library's config types

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(seed=self.seed, **_asdict(self.synth))

    def dnn_config(self) -> dnn.DnnTrainConfig:
        return dnn.DnnTrainConfig(seed=self.seed, **_asdict(self.dnn))

    def bnn_spec(self, input_dim: int) -> bnn.BnnSpec:
        return bnn.BnnSpec(input_dim=input_dim, hidden=tuple(self.bnn.hidden),
                           prior_std=self.bnn.prior_std, likelihood=self.bnn.likelihood)

    def hmc_config(self) -> bnn.HmcConfig:
        b = self.bnn
        return bnn.HmcConfig(draws=b.draws, warmup=b.warmup, leapfrog_steps=b.leapfrog_steps,
                             step_size=b.step_size, chains=b.chains, seed=self.seed)

    def mh_config(self) -> bnn.MhConfig:
        b = self.bnn
        return bnn.MhConfig(steps=b.mh_steps, warmup=b.mh_warmup, thin=b.mh_thin,
                            step_size=b.mh_step_size, chains=b.chains, seed=self.seed)

    def eval_config(self) -> EvalConfig:
        e = self.evaluate
        return EvalConfig(
            ratio=e.ratio, dnn_features=e.dnn_features, bnn_features=e.bnn_features,
            band=self.features.band, dnn=self.dnn_config(),
            bnn_spec=self.bnn_spec(e.bnn_features), sampler=self.bnn.sampler,
            hmc=self.hmc_config(), mh=self.mh_config(),
        )

    def to_dict(self) -> dict:
        d = {"seed": self.seed}
        for f in fields(self):
            if f.name != "seed":
                d[f.name] = _asdict(getattr(self, f.name))
        return d


def _asdict(section) -> dict:
    out = {}
    for f in fields(section):
        v = getattr(section, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    return out


def _section(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    values = {}
    for k, v in data.items():
        default = getattr(cls(), k)
        if isinstance(default, tuple):
            v = tuple(v)
        elif isinstance(default, bool) or not isinstance(default, (int, float)):
            pass
        elif isinstance(default, float):
            v = float(v)
        elif isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{where}.{k} must be an integer")
        else:
            v = int(v)
        values[k] = v
    return cls(**values)


def from_dict(data: dict, base: Optional[RunConfig] = None) -> RunConfig:
    base = base or RunConfig()
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    updates = {}
    for k, v in data.items():
        if k == "seed":
            updates[k] = int(v)
        else:
            if not isinstance(v, dict):
                raise ConfigError(f"{k} must be an object")
            current = getattr(base, k)
            _section(type(current), v, k)  # reject unknown keys before merging
            updates[k] = _section(type(current), {**_asdict(current), **v}, k)
    return replace(base, **updates)


def load(path=None, env=None) -> RunConfig:
    """Defaults, then the env seed, then the file at `path` (if any)."""
    env = os.environ if env is None else env
    cfg = RunConfig()
    if env.get(SEED_ENV):
        try:
            cfg = replace(cfg, seed=int(env[SEED_ENV]))
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = from_dict(data, cfg)
    return cfg


def override(cfg: RunConfig, section: Optional[str], **values) -> RunConfig:
    """Apply explicit flag values (None means 'not given')."""
    values = {k: v for k, v in values.items() if v is not None}
    if not values:
        return cfg
    if section is None:
        return replace(cfg, **values)
    return replace(cfg, **{section: replace(getattr(cfg, section), **values)})
