import numpy as np
import pytest

from maada import model
from maada.errors import ConfigError, DataError, TrainingError
from maada.losses import (
    LossWeights,
    build_objective,
    loss_adv,
    loss_align,
    loss_cons,
    loss_src,
    loss_total,
    median_bandwidth,
    mmd_rbf,
    objective,
    objective_inputs,
)


@pytest.fixture
def net():
    return model.init_mlp((2, 6, 3), 1)


@pytest.fixture
def batch():
    rng = np.random.default_rng(0)
    return rng.normal(size=(5, 2)), rng.integers(0, 3, size=5), rng.normal(size=(4, 2)) + 0.5


def test_src_on_zero_net_is_ln2():
    p = model.zero_params((2, 4, 2))
    assert abs(loss_src(p, np.ones((3, 2)), [0, 1, 1]) - np.log(2)) < 1e-15


def test_src_delegates_and_matches_brute_force(net, batch):
    x, y, _ = batch
    assert loss_src(net, x, y) == pytest.approx(model.cross_entropy(net, x, y), abs=1e-15)
    pr = model.predict_proba(net, x)
    assert abs(loss_src(net, x, y) - sum(-np.log(pr[i, y[i]]) for i in range(5)) / 5) < 1e-12


def test_src_requires_labels(net):
    with pytest.raises(DataError):
        loss_src(net, np.zeros((2, 2)), [0, -1])


def test_adv_without_perturbation_equals_src(net, batch):
    x, y, _ = batch
    assert loss_adv(net, x, y, x) == loss_src(net, x, y)


def test_adv_two_point_brute_force(net):
    x = np.array([[0.1, -0.3], [1.2, 0.4]])
    x_off = x + np.array([[0.05, 0.0], [0.0, -0.1]])
    y = np.array([2, 0])
    p, q = model.predict_proba(net, x), model.predict_proba(net, x_off)
    expected = np.mean([-np.log(q[i, y[i]]) + np.sum((q[i] - p[i]) ** 2) for i in range(2)])
    assert abs(loss_adv(net, x, y, x_off) - expected) < 1e-12
    assert loss_adv(net, x, y, x_off) - loss_src(net, x_off, y) >= 0


def test_cons(net, batch):
    x, _, _ = batch
    assert loss_cons(net, x, x) == 0.0
    x1 = np.array([[0.2, 0.2]])
    x1_on = np.array([[0.5, -0.1]])
    expected = np.sum((model.predict_proba(net, x1_on) - model.predict_proba(net, x1)) ** 2)
    assert abs(loss_cons(net, x1, x1_on) - expected) < 1e-12
    assert loss_cons(net, x, x + 0.3) >= 0


def test_mmd_identities():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(7, 3))
    assert abs(mmd_rbf(A, A)) < 1e-12
    B = rng.normal(size=(5, 3)) + 1
    assert abs(mmd_rbf(A, B, 0.8) - mmd_rbf(B, A, 0.8)) < 1e-12
    assert mmd_rbf(A, B) >= -1e-12


@pytest.mark.parametrize("D,sigma", [(0.5, 1.0), (2.0, 0.7), (1e-3, 3.0)])
def test_mmd_two_point_closed_form(D, sigma):
    a = np.array([[0.0, 0.0]])
    b = np.array([[D * 0.6, D * 0.8]])
    assert abs(mmd_rbf(a, b, sigma) - 2 * (1 - np.exp(-D ** 2 / (2 * sigma ** 2)))) < 1e-10


def test_mmd_brute_force_kernel_sums():
    rng = np.random.default_rng(9)
    A, B = rng.normal(size=(4, 2)), rng.normal(size=(6, 2))
    sigma = 0.9

    def k(u, v):
        return np.exp(-np.sum((u - v) ** 2) / (2 * sigma ** 2))

    aa = np.mean([k(u, v) for u in A for v in A])
    bb = np.mean([k(u, v) for u in B for v in B])
    ab = np.mean([k(u, v) for u in A for v in B])
    assert abs(mmd_rbf(A, B, sigma) - (aa + bb - 2 * ab)) < 1e-12


def test_mmd_bandwidth_errors_and_median():
    with pytest.raises(ConfigError):
        mmd_rbf(np.ones((2, 2)), np.zeros((2, 2)), 0.0)
    A = np.array([[0.0], [1.0]])
    B = np.array([[3.0]])
    # pairwise distances 1, 3, 2 -> median 2
    assert median_bandwidth(A, B) == 2.0
    assert median_bandwidth(np.zeros((2, 1)), np.zeros((1, 1))) == 1e-6


def test_align(net, batch):
    x, _, xt = batch
    assert abs(loss_align(net, x, x)) < 1e-10
    assert loss_align(net, x, xt) >= 0


def test_align_two_point_toy():
    p = model.ModelParams([np.array([[1.0, -1.0], [0.5, 0.0]])], [np.zeros(2)])
    xs = np.array([[0.0, 0.0], [1.0, 0.0]])
    xt = np.array([[0.0, 1.0], [2.0, 2.0]])
    ps, pt = model.predict_proba(p, xs), model.predict_proba(p, xt)
    sigma = 0.5
    k = lambda u, v: np.exp(-np.sum((u - v) ** 2) / (2 * sigma ** 2))  # noqa: E731
    mmd = (np.mean([k(u, v) for u in ps for v in ps]) + np.mean([k(u, v) for u in pt for v in pt])
           - 2 * np.mean([k(u, v) for u in ps for v in pt]))
    expected = mmd + np.sum((ps.mean(0) - pt.mean(0)) ** 2)
    assert abs(loss_align(p, xs, xt, sigma) - expected) < 1e-10


def test_total_examples():
    assert loss_total((1.0, 2.0, 3.0, 4.0), LossWeights(0, 0, 0)).l_total == 1.0
    assert loss_total((1.0, 2.0, 3.0, 4.0), LossWeights(1, 1, 1)).l_total == 10.0
    rng = np.random.default_rng(1)
    for _ in range(200):
        c = rng.uniform(0, 5, size=4)
        w = LossWeights(*rng.uniform(0, 3, size=3))
        b = loss_total(c, w)
        resum = c[0] + w.lambda_adv * c[1] + w.lambda_cons * c[2] + w.lambda_align * c[3]
        assert abs(b.l_total - resum) < 1e-12


def test_total_is_affine_in_each_weight():
    c = (0.4, 1.1, 0.3, 0.9)
    for i, field in enumerate(("lambda_adv", "lambda_cons", "lambda_align")):
        base = dict(lambda_adv=0.5, lambda_cons=0.5, lambda_align=0.5)
        lo = loss_total(c, LossWeights(**base)).l_total
        base[field] = 2.5
        hi = loss_total(c, LossWeights(**base)).l_total
        assert abs((hi - lo) / 2.0 - c[i + 1]) < 1e-12


def test_total_rejects_non_finite():
    with pytest.raises(TrainingError, match="l_cons"):
        loss_total((1.0, 1.0, np.nan, 1.0), LossWeights())


def test_weights_validation():
    with pytest.raises(ConfigError):
        LossWeights(-1.0, 0, 0)
    with pytest.raises(ConfigError):
        LossWeights(np.inf, 0, 0)


def _inputs(p, rng, shift=0.1):
    xs = rng.normal(size=(6, 2))
    ys = rng.integers(0, 3, size=6)
    xt = rng.normal(size=(6, 2)) + 1
    return objective_inputs(p, xs, ys, xs + shift, xt, xs - shift, xt + shift)


def test_objective_components_match_numeric_entry_points(net):
    rng = np.random.default_rng(5)
    inp = _inputs(net, rng)
    w = LossWeights(0.3, 0.6, 0.9)
    b, _ = objective(net, build_objective(2, w), inp, w)
    xs, xt = inp["x_s"], inp["x_t"]
    ys = inp["onehot_s"].argmax(1)
    assert abs(b.l_src - loss_src(net, xs, ys)) < 1e-12
    assert abs(b.l_adv - loss_adv(net, xs, ys, inp["x_off"])) < 1e-12
    both = np.vstack([xs, xt])
    assert abs(b.l_cons - loss_cons(net, both, np.vstack([inp["x_on_s"], inp["x_on_t"]]))) < 1e-12
    assert abs(b.l_align - loss_align(net, xs, xt)) < 1e-12
    resum = b.l_src + 0.3 * b.l_adv + 0.6 * b.l_cons + 0.9 * b.l_align
    assert abs(b.l_total - resum) < 1e-12
    assert min(b.l_src, b.l_adv, b.l_cons, b.l_align) >= 0


def test_objective_degenerates_to_erm(net):
    rng = np.random.default_rng(6)
    xs = rng.normal(size=(6, 2))
    ys = rng.integers(0, 3, size=6)
    xt = rng.normal(size=(6, 2))
    inp = objective_inputs(net, xs, ys, xs, xt, xs, xt)
    erm_values, erm_grads = model.ce_param_gradient(net, xs, ys)
    for lam_cons in (0.0, 1.0, 3.0):
        w = LossWeights(0.0, lam_cons, 0.0)
        b, g = objective(net, build_objective(2, w), inp, w)
        assert abs(b.l_total - float(erm_values["result"])) < 1e-10
        for k in g:
            assert np.max(np.abs(g[k] - erm_grads[k])) < 1e-10
    # with no perturbation the adversarial term is a copy of the source term
    w = LossWeights(2.0, 0.0, 0.0)
    _, g = objective(net, build_objective(2, w), inp, w)
    for k in g:
        assert np.max(np.abs(g[k] - 3.0 * erm_grads[k])) < 1e-10


def test_doubling_weights_doubles_regularizer_gradient(net):
    rng = np.random.default_rng(7)
    inp = _inputs(net, rng, shift=0.2)
    w1, w2 = LossWeights(0.4, 0.7, 0.2), LossWeights(0.8, 1.4, 0.4)
    w0 = LossWeights(0.0, 0.0, 0.0)
    _, g0 = objective(net, build_objective(2, w0), inp, w0)
    _, g1 = objective(net, build_objective(2, w1), inp, w1)
    _, g2 = objective(net, build_objective(2, w2), inp, w2)
    for k in g0:
        assert np.allclose(g2[k] - g0[k], 2 * (g1[k] - g0[k]), atol=1e-12)
