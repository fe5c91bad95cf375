import numpy as np
import pytest

from motordiag.dnn import DnnTrainConfig, build_dnn, classify, predict_dnn, train_dnn
from motordiag.errors import DimensionMismatch
from motordiag.nn import Activation, flatten, zeros_like


def blobs(seed=0, n=100):
    rng = np.random.default_rng(seed)
    a = rng.normal([-2.0, -2.0], 0.5, (n, 2))
    b = rng.normal([2.0, 2.0], 0.5, (n, 2))
    return np.vstack([a, b]), np.r_[np.zeros(n), np.ones(n)]


@pytest.fixture(scope="module")
def trained():
    x, y = blobs()
    params, hist = train_dnn(x, y, DnnTrainConfig(epochs=200, seed=3))
    return x, y, params, hist


def test_layer_shapes():
    p = build_dnn(2025)
    assert [l.weight.shape for l in p.layers] == [(180, 2025), (60, 180), (60, 60), (30, 60), (1, 30)]
    assert [l.activation for l in p.layers] == [Activation.RELU] * 4 + [Activation.SIGMOID]
    assert build_dnn(5).layers[0].weight.shape == (180, 5)


def test_init_deterministic():
    assert flatten(build_dnn(7, seed=1)).tobytes() == flatten(build_dnn(7, seed=1)).tobytes()
    assert flatten(build_dnn(7, seed=1)).tobytes() != flatten(build_dnn(7, seed=2)).tobytes()


def test_separable_blobs(trained):
    x, y, params, hist = trained
    assert np.all(classify(predict_dnn(params, x)) == y)
    assert predict_dnn(params, np.array([-2.0, -2.0])) < 0.5
    assert predict_dnn(params, np.array([2.0, 2.0])) > 0.5
    assert len(hist) == 201 and hist[-1] < hist[0]


def test_zero_epochs_is_identity():
    x, y = blobs(n=5)
    init = build_dnn(2, seed=4)
    p, hist = train_dnn(x, y, DnnTrainConfig(epochs=0, seed=4))
    assert p == init and len(hist) == 1


def test_training_deterministic():
    x, y = blobs(n=20)
    cfg = DnnTrainConfig(epochs=5, seed=9)
    a, _ = train_dnn(x, y, cfg)
    b, _ = train_dnn(x, y, cfg)
    assert flatten(a).tobytes() == flatten(b).tobytes()


def test_weight_decay_shrinks_norm():
    x, y = blobs(n=30)
    plain, _ = train_dnn(x, y, DnnTrainConfig(epochs=30, seed=2))
    decayed, _ = train_dnn(x, y, DnnTrainConfig(epochs=30, seed=2, lam=0.5))
    norm = lambda p: sum(float(np.sum(l.weight ** 2)) for l in p.layers)
    assert norm(decayed) < norm(plain)


def test_zero_weights_predict_half():
    p = zeros_like(build_dnn(3))
    np.testing.assert_array_equal(predict_dnn(p, np.random.default_rng(0).normal(0, 9, (4, 3))), 0.5)


def test_tie_is_fault():
    assert classify(0.5) == 1
    np.testing.assert_array_equal(classify(np.array([0.2, 0.5, 0.7])), [0, 1, 1])


def test_output_strictly_inside_unit_interval():
    out = predict_dnn(build_dnn(4, seed=5), np.random.default_rng(1).normal(0, 3, (100, 4)))
    assert np.all((out > 0) & (out < 1))


def test_bad_inputs():
    with pytest.raises(DimensionMismatch):
        train_dnn(np.zeros((3, 2)), np.zeros(2), DnnTrainConfig(epochs=1))
    with pytest.raises(DimensionMismatch):
        train_dnn(np.zeros((3, 2)), np.zeros(3), DnnTrainConfig(epochs=1), build_dnn(4))
    with pytest.raises(ValueError):
        DnnTrainConfig(momentum=1.0)
