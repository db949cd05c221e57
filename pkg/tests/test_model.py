import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maada import gradcore as gc
from maada import model
from maada.errors import ConfigError, DataError, DimensionError
from maada.losses import LossWeights, build_objective

from .helpers import rel_err


def test_init_is_deterministic_with_expected_shapes():
    a = model.init_mlp((2, 8, 2), 0)
    b = model.init_mlp((2, 8, 2), 0)
    assert a.flat().tobytes() == b.flat().tobytes()
    assert [w.shape for w in a.weights] == [(2, 8), (8, 2)]
    assert [b.shape for b in a.biases] == [(8,), (2,)]
    assert all(np.all(b == 0) for b in a.biases)
    s = np.sqrt(6 / 10)
    assert np.all(np.abs(a.weights[0]) <= s)
    assert model.init_mlp((2, 8, 2), 1).flat().tobytes() != a.flat().tobytes()


@pytest.mark.parametrize("sizes", [(5,), (), (2, 0, 2), None])
def test_init_rejects_bad_sizes(sizes):
    with pytest.raises(ConfigError):
        model.init_mlp(sizes, 0)


def test_zero_network_is_uniform():
    p = model.zero_params((3, 4, 2))
    x = np.random.default_rng(0).normal(size=(6, 3))
    assert np.array_equal(model.predict_proba(p, x), np.full((6, 2), 0.5))
    p4 = model.zero_params((3, 4))
    assert abs(model.cross_entropy(p4, x, np.arange(6) % 4) - np.log(4)) < 1e-12


def test_softmax_arithmetic():
    # a single linear layer with zero weights and bias (ln 3, 0) gives logits (ln 3, 0)
    p = model.ModelParams([np.zeros((2, 2))], [np.array([np.log(3.0), 0.0])])
    assert np.allclose(model.predict_proba(p, np.zeros((1, 2))), [[0.75, 0.25]], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 3), elements=st.floats(-1e3, 1e3)), st.integers(0, 2**32 - 1))
def test_rows_sum_to_one(x, seed):
    p = model.init_mlp((3, 7, 4), seed)
    prob = model.predict_proba(p, x)
    assert np.all(prob >= 0)
    assert np.all(np.abs(prob.sum(axis=1) - 1) < 1e-9)


def test_predict_shape_mismatch():
    with pytest.raises(DimensionError):
        model.predict_proba(model.init_mlp((3, 2), 0), np.ones((2, 4)))


def test_cross_entropy_matches_per_sample_brute_force():
    rng = np.random.default_rng(7)
    p = model.init_mlp((2, 5, 3), 4)
    x = rng.normal(size=(9, 2))
    y = rng.integers(0, 3, size=9)
    probs = model.predict_proba(p, x)
    brute = sum(-np.log(probs[i, y[i]]) for i in range(9)) / 9
    assert abs(model.cross_entropy(p, x, y) - brute) < 1e-12


def test_cross_entropy_near_zero_for_confident_truth():
    p = model.ModelParams([np.zeros((2, 2))], [np.array([50.0, 0.0])])
    assert model.cross_entropy(p, np.zeros((3, 2)), np.zeros(3, dtype=int)) < 1e-20


def test_label_out_of_range():
    p = model.init_mlp((2, 3), 0)
    with pytest.raises(DataError):
        model.cross_entropy(p, np.zeros((1, 2)), np.array([3]))
    with pytest.raises(DataError):
        model.cross_entropy(p, np.zeros((1, 2)), np.array([-1]))


def test_input_gradient_matches_finite_differences():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        p = model.init_mlp((3, 6, 6, 3), seed)
        x = rng.normal(size=3)
        y = int(rng.integers(3))
        g = model.input_gradient(p, x, y)
        fd = gc.finite_diff_grad(lambda v: model.cross_entropy(p, v[None, :], np.array([y])), x, 1e-5)
        assert rel_err(g, fd) < 1e-4


def test_input_gradient_of_softmax_regression_is_analytic():
    rng = np.random.default_rng(2)
    W = rng.normal(size=(4, 3))
    b = rng.normal(size=3)
    p = model.ModelParams([W], [b])
    x = rng.normal(size=4)
    prob = model.softmax((x @ W + b)[None, :])[0]
    expected = W @ (prob - np.eye(3)[1])
    assert np.allclose(model.input_gradient(p, x, 1), expected, atol=1e-12)


def test_input_gradient_vanishes_when_saturated():
    W = np.array([[40.0, -40.0], [0.0, 0.0]])
    p = model.ModelParams([W], [np.zeros(2)])
    g = model.input_gradient(p, np.array([1.0, 0.0]), 0)
    assert np.linalg.norm(g) < 1e-6


def test_batched_input_gradients_equal_single_point_ones():
    rng = np.random.default_rng(1)
    p = model.init_mlp((2, 8, 2), 3)
    X = rng.normal(size=(6, 2))
    y = rng.integers(0, 2, size=6)
    G = model.input_gradients(p, X, y)
    for i in range(6):
        assert np.allclose(G[i], model.input_gradient(p, X[i], y[i]), atol=1e-14)


def test_entropy_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    p = model.init_mlp((2, 6, 3), 8)
    x = rng.normal(size=(1, 2))

    def entropy(v):
        pr = model.predict_proba(p, v)
        return float(-(pr * np.log(pr)).sum())

    g = model.entropy_input_gradients(p, x)
    assert rel_err(g, gc.finite_diff_grad(entropy, x, 1e-5)) < 1e-4


def _flat_loss(sizes, tape, inputs):
    def f(flat):
        pp = model.ModelParams.from_flat(sizes, flat)
        return float(gc.forward_eval(tape, {**inputs, **pp.as_dict()}))
    return f


def test_param_gradient_matches_finite_differences_on_small_net():
    from maada.losses import objective_inputs

    sizes = [2, 4, 2]
    for seed in range(10):
        rng = np.random.default_rng(seed)
        p = model.init_mlp(sizes, seed)
        p = model.ModelParams(p.weights, [rng.normal(scale=0.1, size=b.shape) for b in p.biases])
        xs = rng.normal(size=(5, 2))
        ys = rng.integers(0, 2, size=5)
        xt = rng.normal(size=(4, 2))
        inputs = objective_inputs(p, xs, ys, xs + 0.1 * rng.normal(size=xs.shape), xt,
                                  xs + 0.1 * rng.normal(size=xs.shape), xt + 0.1 * rng.normal(size=xt.shape))
        tape = build_objective(2, LossWeights(0.7, 1.3, 0.5))
        _, grads = model.param_gradient(p, tape, inputs)
        flat_grad = np.concatenate([grads[n].ravel() for n in p.names()])
        fd = gc.finite_diff_grad(_flat_loss(sizes, tape, inputs), p.flat(), 1e-5)
        assert rel_err(flat_grad, fd) < 1e-4


def test_flat_round_trip():
    p = model.init_mlp((3, 5, 2), 9)
    q = model.ModelParams.from_flat(p.layer_sizes, p.flat())
    assert q.flat().tobytes() == p.flat().tobytes()
    with pytest.raises(DimensionError):
        model.ModelParams.from_flat([3, 5, 2], p.flat()[:-1])
