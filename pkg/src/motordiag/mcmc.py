"""
Single-chain MCMC kernels over flat real vectors.

Both kernels adapt their step size during warmup with dual averaging toward
a target acceptance probability and freeze it afterwards, so the kept draws
come from a fixed, reversible transition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .errors import DivergentTrajectory, NonFiniteLogJoint

MH_TARGET_ACCEPT = 0.35
HMC_TARGET_ACCEPT = 0.8
MAX_ENERGY_ERROR = 1000.0
STEP_JITTER = 0.2


@dataclass
class ChainResult:
    draws: np.ndarray          # (kept, D)
    log_prob: np.ndarray       # (kept,)
    accepted: int              # post-warmup accepted transitions
    steps: int                 # post-warmup transitions
    step_size: float           # frozen step size
    divergences: int = 0       # warmup divergences (rejected)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0


class DualAveraging:
    """Step-size adaptation of Hoffman & Gelman (NUTS, algorithm 5)."""

    def __init__(self, initial: float, target: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * initial)
        self.target = target
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.t = 0
        self.h_bar = 0.0
        self.log_step = math.log(initial)
        self.log_step_bar = 0.0

    def update(self, accept_prob: float) -> float:
        self.t += 1
        t = self.t
        w = 1.0 / (t + self.t0)
        self.h_bar = (1 - w) * self.h_bar + w * (self.target - accept_prob)
        self.log_step = self.mu - math.sqrt(t) / self.gamma * self.h_bar
        eta = t ** -self.kappa
        self.log_step_bar = eta * self.log_step + (1 - eta) * self.log_step_bar
        return math.exp(self.log_step)

    @property
    def final(self) -> float:
        return math.exp(self.log_step_bar) if self.t else math.exp(self.log_step)


def _keep(i: int, warmup: int, thin: int) -> bool:
    return i >= warmup and (i - warmup + 1) % thin == 0


def _check_schedule(steps: int, warmup: int, thin: int):
    if warmup < 0 or thin < 1:
        raise ValueError("warmup must be >= 0 and thin >= 1")
    if steps <= warmup:
        raise ValueError(f"steps ({steps}) must exceed warmup ({warmup})")


def random_walk_metropolis(log_prob: Callable[[np.ndarray], float], x0, steps: int,
                           warmup: int, thin: int, step_size: float,
                           rng: np.random.Generator,
                           target_accept: float = MH_TARGET_ACCEPT) -> ChainResult:
    """Isotropic Gaussian random-walk Metropolis; `steps` counts warmup too."""
    _check_schedule(steps, warmup, thin)
    x = np.array(x0, dtype=np.float64)
    lp = float(log_prob(x))
    if not np.isfinite(lp):
        raise NonFiniteLogJoint("log density is not finite at the initial point")
    adapt = DualAveraging(step_size, target_accept) if warmup else None
    eps = step_size
    draws, lps = [], []
    accepted = 0
    for i in range(steps):
        if i == warmup and adapt is not None:
            eps = adapt.final
        proposal = x + eps * rng.standard_normal(x.size)
        lp_new = float(log_prob(proposal))
        log_ratio = lp_new - lp if np.isfinite(lp_new) else -np.inf
        accept_prob = math.exp(min(0.0, log_ratio))
        if math.log(rng.uniform()) < log_ratio:
            x, lp = proposal, lp_new
            if i >= warmup:
                accepted += 1
        if i < warmup:
            eps = adapt.update(accept_prob)
        elif _keep(i, warmup, thin):
            draws.append(x.copy())
            lps.append(lp)
    return ChainResult(np.array(draws).reshape(len(draws), x.size), np.array(lps),
                       accepted, steps - warmup, eps)


def leapfrog(grad_log_prob: Callable[[np.ndarray], np.ndarray], q, p, step_size: float,
             n_steps: int) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate Hamiltonian dynamics for H = -log_prob(q) + |p|^2 / 2."""
    q = np.array(q, dtype=np.float64)
    p = np.array(p, dtype=np.float64)
    p = p + 0.5 * step_size * grad_log_prob(q)
    for k in range(n_steps):
        q = q + step_size * p
        if k < n_steps - 1:
            p = p + step_size * grad_log_prob(q)
    p = p + 0.5 * step_size * grad_log_prob(q)
    return q, p


def hamiltonian_monte_carlo(log_prob_and_grad: Callable, x0, draws: int, warmup: int,
                            leapfrog_steps: int, step_size: float,
                            rng: np.random.Generator, thin: int = 1,
                            target_accept: float = HMC_TARGET_ACCEPT,
                            jitter: float = STEP_JITTER) -> ChainResult:
    """HMC with identity mass matrix; `draws` counts post-warmup transitions.

    Each transition scales the step size by a uniform factor in
    [1 - jitter, 1 + jitter] so a fixed trajectory length cannot lock onto
    a periodic orbit of the target.

    A trajectory whose energy error exceeds MAX_ENERGY_ERROR is rejected
    during warmup; after warmup it raises DivergentTrajectory.
    """
    _check_schedule(warmup + draws, warmup, thin)
    x = np.array(x0, dtype=np.float64)
    lp, g = log_prob_and_grad(x)
    if not np.isfinite(lp) or not np.all(np.isfinite(g)):
        raise NonFiniteLogJoint("log density is not finite at the initial point")
    adapt = DualAveraging(step_size, target_accept) if warmup else None
    eps = step_size
    kept, kept_lp = [], []
    accepted = 0
    divergences = 0
    total = warmup + draws
    for i in range(total):
        if i == warmup and adapt is not None:
            eps = adapt.final
        p0 = rng.standard_normal(x.size)
        h = eps * (1.0 + jitter * (2.0 * rng.uniform() - 1.0)) if jitter else eps
        q, p = x.copy(), p0 + 0.5 * h * g
        lp_new, g_new = lp, g
        for k in range(leapfrog_steps):
            q = q + h * p
            lp_new, g_new = log_prob_and_grad(q)
            if not np.isfinite(lp_new):
                break
            p = p + (h if k < leapfrog_steps - 1 else 0.5 * h) * g_new
        h0 = -lp + 0.5 * float(p0 @ p0)
        h1 = -lp_new + 0.5 * float(p @ p) if np.isfinite(lp_new) else np.inf
        energy_error = h1 - h0
        if not np.isfinite(energy_error) or abs(energy_error) > MAX_ENERGY_ERROR:
            if i >= warmup:
                raise DivergentTrajectory(
                    f"energy error {energy_error} at step size {eps:.3g}; lower the step size"
                )
            divergences += 1
            accept_prob = 0.0
        else:
            accept_prob = math.exp(min(0.0, -energy_error))
            if rng.uniform() < accept_prob:
                x, lp, g = q, lp_new, g_new
                if i >= warmup:
                    accepted += 1
        if i < warmup:
            eps = adapt.update(accept_prob)
        elif _keep(i, warmup, thin):
            kept.append(x.copy())
            kept_lp.append(lp)
    return ChainResult(np.array(kept).reshape(len(kept), x.size), np.array(kept_lp),
                       accepted, draws, eps, divergences)


# --------------------------------------------------------------------------
# diagnostics


def batch_means_se(draws: np.ndarray, n_batches: int = 20) -> np.ndarray:
    """Monte Carlo standard error of the mean per coordinate, by batch means."""
    draws = np.asarray(draws, dtype=np.float64)
    n = draws.shape[0]
    b = min(n_batches, n)
    if b < 2:
        return np.full(draws.shape[1:], np.inf)
    size = n // b
    means = draws[: b * size].reshape(b, size, *draws.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(b)


def chain_mean_discrepancy(chains) -> float:
    """Largest |difference of chain means| / standard error of that difference.

    Values above 3 indicate chains that have not mixed into the same region.
    """
    chains = [np.asarray(c, dtype=np.float64) for c in chains]
    if len(chains) < 2:
        return 0.0
    means = [c.mean(axis=0) for c in chains]
    ses = [batch_means_se(c) for c in chains]
    worst = 0.0
    for i in range(len(chains)):
        for j in range(i + 1, len(chains)):
            se = np.sqrt(ses[i] ** 2 + ses[j] ** 2)
            diff = np.abs(means[i] - means[j])
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(se > 0, diff / se, np.where(diff > 0, np.inf, 0.0))
            worst = max(worst, float(np.max(z)))
    return worst
