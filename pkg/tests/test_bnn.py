import json
import math

import numpy as np
import pytest

from motordiag import bnn
from motordiag.audio import ClassLabel
from motordiag.errors import DimensionMismatch
from motordiag.nn import Activation, Likelihood, unflatten

from oracles import forward_ref

TOY = bnn.BnnSpec(input_dim=1, hidden=(), output_activation=Activation.IDENTITY,
                  likelihood=Likelihood.GAUSSIAN_SQUARED)


def conjugate_data(n, seed=0, mu=1.5):
    """f(x, w) = bias when x = 0; N(0, 1) prior and unit-variance noise."""
    y = np.random.default_rng(seed).normal(mu, 1.0, n)
    return np.zeros((n, 1)), y, y.sum() / (n + 1), 1.0 / (n + 1)


def ensemble_of(draws, spec=None):
    spec = spec or bnn.BnnSpec()
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    s = draws.shape[0]
    return bnn.PosteriorEnsemble(spec, draws, np.zeros(s), np.zeros(s, dtype=int), 1, 1.0, 0)


def test_default_spec():
    spec = bnn.BnnSpec()
    assert spec.dim == 36
    assert [s[:2] for s in spec.shapes] == [(5, 5), (1, 5)]


def test_log_prior_at_zero():
    spec = bnn.BnnSpec()
    assert bnn.log_joint(spec, np.zeros(36)) == pytest.approx(-18 * math.log(2 * math.pi))


def test_prior_width_effect():
    narrow, wide = bnn.BnnSpec(prior_std=1.0), bnn.BnnSpec(prior_std=2.0)
    big = np.full(36, 3.0)
    assert bnn.log_prior(wide, big) > bnn.log_prior(narrow, big)
    assert bnn.log_prior(wide, np.zeros(36)) < bnn.log_prior(narrow, np.zeros(36))


def test_log_joint_term_by_term():
    spec = bnn.BnnSpec(input_dim=3, hidden=(4,), likelihood=Likelihood.GAUSSIAN_SQUARED)
    rng = np.random.default_rng(1)
    w = rng.normal(0, 1, spec.dim)
    x = rng.normal(0, 1, (6, 3))
    y = rng.integers(0, 2, 6).astype(float)
    params = unflatten(w, spec.shapes)
    ref = 0.0
    for v in w:
        ref += -0.5 * v * v - 0.5 * math.log(2 * math.pi)
    for row, t in zip(x, y):
        r = t - forward_ref(params, row)[0, 0]
        ref += -0.5 * r * r - 0.5 * math.log(2 * math.pi)
    assert bnn.log_joint(spec, w, x, y) == pytest.approx(ref, rel=1e-12)


def test_bernoulli_log_joint_term_by_term():
    spec = bnn.BnnSpec(input_dim=2, hidden=(3,))
    rng = np.random.default_rng(2)
    w = rng.normal(0, 1, spec.dim)
    x = rng.normal(0, 1, (5, 2))
    y = np.array([0, 1, 1, 0, 1.0])
    params = unflatten(w, spec.shapes)
    ref = bnn.log_prior(spec, w)
    for row, t in zip(x, y):
        q = forward_ref(params, row)[0, 0]
        ref += t * math.log(q) + (1 - t) * math.log(1 - q)
    assert bnn.log_joint(spec, w, x, y) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("lik", list(Likelihood))
def test_log_joint_gradient(lik):
    spec = bnn.BnnSpec(input_dim=2, hidden=(3,), likelihood=lik, prior_std=0.7)
    rng = np.random.default_rng(3)
    w = rng.normal(0, 1, spec.dim)
    x, y = rng.normal(0, 1, (4, 2)), np.array([0, 1, 1, 0.0])
    _, g = bnn.log_joint_and_grad(spec, w, x, y)
    fd = np.array([(bnn.log_joint(spec, w + e, x, y) - bnn.log_joint(spec, w - e, x, y)) / 2e-5
                   for e in np.eye(spec.dim) * 1e-5])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_dimension_errors():
    with pytest.raises(DimensionMismatch):
        bnn.log_joint(bnn.BnnSpec(), np.zeros(35))
    with pytest.raises(DimensionMismatch):
        bnn.log_joint(bnn.BnnSpec(), np.zeros(36), np.zeros((2, 5)), np.zeros(3))


def test_mh_prior_only():
    e = bnn.sample_posterior_mh(TOY, np.zeros((0, 1)), np.zeros(0),
                                bnn.MhConfig(steps=26000, warmup=1000, thin=2, step_size=0.5,
                                             chains=4, seed=1))
    assert len(e) == 50000
    assert np.all(np.abs(e.draws.mean(0)) < 0.05)
    np.testing.assert_allclose(e.draws.var(0), 1.0, rtol=0.1)


def test_mh_bookkeeping_and_zero_draws():
    cfg = bnn.MhConfig(steps=107, warmup=20, thin=4, chains=3, seed=0)
    e = bnn.sample_posterior_mh(TOY, np.zeros((0, 1)), np.zeros(0), cfg)
    assert len(e) == (107 - 20) // 4 * 3
    assert sorted(set(e.chain_ids.tolist())) == [0, 1, 2]
    with pytest.raises(ValueError):
        bnn.sample_posterior_mh(TOY, np.zeros((0, 1)), np.zeros(0), bnn.MhConfig(steps=20, warmup=20))
    with pytest.raises(ValueError):
        bnn.sample_posterior_hmc(TOY, np.zeros((0, 1)), np.zeros(0), bnn.HmcConfig(draws=0))


@pytest.mark.parametrize("sampler", ["mh", "hmc"])
def test_conjugate_toy(sampler):
    x, y, mean, var = conjugate_data(10)
    if sampler == "mh":
        e = bnn.sample_posterior_mh(TOY, x, y, bnn.MhConfig(steps=41000, warmup=1000, thin=4,
                                                            step_size=0.3, chains=2, seed=5))
    else:
        e = bnn.sample_posterior_hmc(TOY, x, y, bnn.HmcConfig(draws=5000, warmup=300,
                                                              leapfrog_steps=5, step_size=0.3,
                                                              chains=2, seed=5))
    b = e.draws[:, 1]
    assert b.mean() == pytest.approx(mean, rel=0.05)
    assert b.var() == pytest.approx(var, rel=0.1)


def test_posterior_contraction():
    variances = []
    for n in (1, 10, 100):
        x, y, _, var = conjugate_data(n, seed=n)
        e = bnn.sample_posterior_hmc(TOY, x, y, bnn.HmcConfig(draws=3000, warmup=300,
                                                              leapfrog_steps=5, chains=2, seed=0))
        variances.append(e.draws[:, 1].var())
    assert variances[0] > variances[1] > variances[2]


def test_sampling_is_seeded():
    x, y, _, _ = conjugate_data(5)
    cfg = bnn.HmcConfig(draws=50, warmup=20, leapfrog_steps=3, chains=2, seed=11)
    a = bnn.sample_posterior_hmc(TOY, x, y, cfg)
    b = bnn.sample_posterior_hmc(TOY, x, y, cfg)
    assert a.draws.tobytes() == b.draws.tobytes()


def test_predictive_degenerate():
    w = np.random.default_rng(4).normal(0, 1, 36)
    e = ensemble_of(np.vstack([w, w, w]))
    x = np.random.default_rng(5).normal(0, 1, 5)
    pred = bnn.posterior_predictive(e, x)
    lo, hi = pred.credible_interval()
    assert lo == hi == pred.mean
    assert pred.mean == pytest.approx(forward_ref(unflatten(w, e.spec.shapes), x)[0, 0], rel=1e-12)
    label, width = bnn.predict_class_bnn(bnn.posterior_predictive(ensemble_of(w), x))
    assert width == 0.0


def test_predictive_bounds_and_batch():
    rng = np.random.default_rng(6)
    e = ensemble_of(rng.normal(0, 1, (40, 36)))
    x = rng.normal(0, 1, (7, 5))
    batch = bnn.predictive_draws(e, x)
    assert batch.shape == (40, 7)
    for j in range(7):
        pred = bnn.posterior_predictive(e, x[j])
        np.testing.assert_allclose(pred.draws, batch[:, j], rtol=1e-12)
        assert pred.draws.min() <= pred.mean <= pred.draws.max()
        lo, hi = pred.credible_interval()
        assert lo <= pred.mean <= hi
    np.testing.assert_allclose(bnn.predict_proba(e, x), batch.mean(0))


def test_predict_class_rules():
    assert bnn.predict_class_bnn(bnn.PredictiveDistribution(np.array([0.5])))[0] == 1
    label, width = bnn.predict_class_bnn(bnn.PredictiveDistribution(np.full(100, 0.99)
                                                                    + np.linspace(0, 0.005, 100)))
    assert label == 1 and width < 0.01
    assert bnn.predict_class_bnn(bnn.PredictiveDistribution(np.array([0.1, 0.2])))[0] == 0


def test_histograms(tmp_path):
    rng = np.random.default_rng(7)
    e = ensemble_of(rng.normal(0, 1, (30, 36)))
    x = rng.normal(0, 1, (4, 5))
    (h,) = bnn.output_distribution_by_class(e, x, [ClassLabel.HEALTHY] * 4)
    assert h.counts.sum() == 4 * 30
    np.testing.assert_allclose(h.edges, np.arange(51) * 0.02, atol=1e-15)
    labels = [ClassLabel.HEALTHY, ClassLabel.GEAR_FAULT, ClassLabel.GEAR_FAULT, ClassLabel.HEALTHY]
    hs = bnn.output_distribution_by_class(e, x, labels)
    assert [h.label for h in hs] == [ClassLabel.HEALTHY, ClassLabel.GEAR_FAULT]
    p = tmp_path / "h.csv"
    bnn.write_histogram_csv(p, hs)
    lines = p.read_text().splitlines()
    assert lines[0] == "class,bin_lo,bin_hi,count" and len(lines) == 1 + 2 * 50
    assert lines[1] == f"healthy,0.00,0.02,{hs[0].counts[0]}"


def test_document_round_trip():
    x, y, _, _ = conjugate_data(3)
    e = bnn.sample_posterior_hmc(TOY, x, y, bnn.HmcConfig(draws=10, warmup=5, chains=2))
    back = bnn.from_document(json.loads(json.dumps(bnn.to_document(e))))
    assert back.spec == e.spec and back.draws.tobytes() == e.draws.tobytes()
    assert back.chains == 2 and back.acceptance_rate == e.acceptance_rate
