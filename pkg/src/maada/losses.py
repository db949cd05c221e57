"""The four training objectives and their weighted total.

Every loss has a numeric entry point (``loss_src``, ``loss_adv`` ...) and a
tape builder used by the trainer, so values and gradients come from the same
recorded computation. Perturbed points and the MMD bandwidth enter as
constants: nothing is differentiated through their construction.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import pdist

from . import gradcore as gc
from .errors import ConfigError, DataError, TrainingError
from .model import (ModelParams, ce_rows, log_softmax, mlp_logits, onehot, param_gradient, param_vars,
                    predict_proba)

BANDWIDTH_FLOOR = 1e-6
TERMS = ("l_src", "l_adv", "l_cons", "l_align")


@dataclass(frozen=True)
class LossWeights:
    lambda_adv: float = 1.0
    lambda_cons: float = 1.0
    lambda_align: float = 0.1

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not (np.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossBreakdown:
    l_src: float
    l_adv: float
    l_cons: float
    l_align: float
    l_total: float

    def as_dict(self):
        return asdict(self)


# -- building blocks on the tape -----------------------------------------------

def _proba(logits):
    return gc.exp(log_softmax(logits))


def _sq_dist_rows(p, q):
    """Per-row squared Euclidean distance, shape (batch,)."""
    return gc.square(p - q).sum(axis=1)


def _pairwise_sq(a, b):
    na = gc.square(a).sum(axis=1, keepdims=True)
    nb = gc.square(b).sum(axis=1, keepdims=True)
    return na + nb.T - 2.0 * (a @ b.T)


def _mmd_tape(a, b, neg_inv_2s2):
    kaa = gc.exp(_pairwise_sq(a, a) * neg_inv_2s2).mean()
    kbb = gc.exp(_pairwise_sq(b, b) * neg_inv_2s2).mean()
    kab = gc.exp(_pairwise_sq(a, b) * neg_inv_2s2).mean()
    return kaa + kbb - 2.0 * kab


def _align_tape(ps, pt, neg_inv_2s2):
    mu_gap = gc.square(ps.mean(axis=0) - pt.mean(axis=0)).sum()
    return _mmd_tape(ps, pt, neg_inv_2s2) + mu_gap


def build_objective(n_layers: int, weights: LossWeights) -> gc.Tape:
    """Tape for the full objective.

    Inputs: parameters ``W{i}``/``b{i}``, ``x_s`` and ``onehot_s`` (labeled
    source batch), ``x_off`` (its off-manifold points), ``x_t`` (unlabeled
    target batch), ``x_on_s``/``x_on_t`` (on-manifold points of both) and
    ``neg_inv_2s2`` (1x1, -1/(2 sigma^2) for the MMD kernel).

    All four terms are marked as outputs; the scalar result only includes
    terms with a nonzero weight, so a zero-weight term contributes nothing to
    the parameter gradient (not even a floating-point zero).
    """
    tape = gc.Tape()
    pv = param_vars(tape, n_layers)
    x_s = tape.input("x_s")
    y_s = tape.input("onehot_s")
    z_s = mlp_logits(x_s, pv)
    l_src = tape.mark("l_src", ce_rows(z_s, y_s).mean())

    p_s = _proba(z_s)
    z_off = mlp_logits(tape.input("x_off"), pv)
    l_adv = tape.mark("l_adv", (ce_rows(z_off, y_s) + _sq_dist_rows(_proba(z_off), p_s)).mean())

    p_t = _proba(mlp_logits(tape.input("x_t"), pv))
    p_on = gc.concat_rows(_proba(mlp_logits(tape.input("x_on_s"), pv)),
                          _proba(mlp_logits(tape.input("x_on_t"), pv)))
    l_cons = tape.mark("l_cons", _sq_dist_rows(p_on, gc.concat_rows(p_s, p_t)).mean())

    l_align = tape.mark("l_align", _align_tape(p_s, p_t, tape.input("neg_inv_2s2")))

    total = l_src
    for lam, term in ((weights.lambda_adv, l_adv), (weights.lambda_cons, l_cons), (weights.lambda_align, l_align)):
        if lam != 0.0:
            total = total + lam * term
    tape.set_result(total)
    return tape


# -- bandwidth -----------------------------------------------------------------

def median_bandwidth(A, B) -> float:
    pooled = np.vstack([np.asarray(A, dtype=np.float64), np.asarray(B, dtype=np.float64)])
    if pooled.shape[0] < 2:
        return 1.0
    return max(float(np.median(pdist(pooled))), BANDWIDTH_FLOOR)


def _resolve_bandwidth(A, B, bandwidth):
    if bandwidth is None or bandwidth == "median":
        return median_bandwidth(A, B)
    bandwidth = float(bandwidth)
    if not bandwidth > 0:
        raise ConfigError(f"bandwidth must be positive, got {bandwidth}")
    return bandwidth


def _kernel_input(sigma):
    return np.array([[-1.0 / (2.0 * sigma * sigma)]])


# -- numeric entry points ------------------------------------------------------

def _eval_tape(builder, inputs):
    tape = gc.Tape()
    tape.set_result(builder(tape))
    return float(gc.forward_eval(tape, inputs))


def _labels(y, n_classes):
    y = np.asarray(y)
    if y.size == 0:
        raise DataError("empty batch")
    if np.any(y < 0):
        raise DataError("source batch has unlabeled points")
    return onehot(y, n_classes)


def loss_src(params: ModelParams, x, y) -> float:
    inputs = params.as_dict() | {"x": np.asarray(x, dtype=np.float64), "y": _labels(y, params.n_classes)}
    return _eval_tape(lambda t: ce_rows(mlp_logits(t.input("x"), param_vars(t, params.n_layers)), t.input("y")).mean(), inputs)


def loss_adv(params: ModelParams, x, y, x_off) -> float:
    def build(t):
        pv = param_vars(t, params.n_layers)
        z_off = mlp_logits(t.input("x_off"), pv)
        p = _proba(mlp_logits(t.input("x"), pv))
        return (ce_rows(z_off, t.input("y")) + _sq_dist_rows(_proba(z_off), p)).mean()

    inputs = params.as_dict() | {"x": np.asarray(x, dtype=np.float64), "x_off": np.asarray(x_off, dtype=np.float64),
                                 "y": _labels(y, params.n_classes)}
    return _eval_tape(build, inputs)


def loss_cons(params: ModelParams, x, x_on) -> float:
    def build(t):
        pv = param_vars(t, params.n_layers)
        return _sq_dist_rows(_proba(mlp_logits(t.input("x_on"), pv)), _proba(mlp_logits(t.input("x"), pv))).mean()

    inputs = params.as_dict() | {"x": np.asarray(x, dtype=np.float64), "x_on": np.asarray(x_on, dtype=np.float64)}
    return _eval_tape(build, inputs)


def mmd_rbf(A, B, bandwidth="median") -> float:
    """Biased MMD^2 with a Gaussian kernel exp(-|a-b|^2 / (2 sigma^2))."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise DataError("MMD needs two nonempty samples")
    if A.shape[1] != B.shape[1]:
        raise DataError(f"embedding widths differ: {A.shape[1]} vs {B.shape[1]}")
    sigma = _resolve_bandwidth(A, B, bandwidth)
    inputs = {"a": A, "b": B, "c": _kernel_input(sigma)}
    return _eval_tape(lambda t: _mmd_tape(t.input("a"), t.input("b"), t.input("c")), inputs)


def loss_align(params: ModelParams, x_s, x_t, bandwidth="median") -> float:
    ps, pt = predict_proba(params, x_s), predict_proba(params, x_t)
    sigma = _resolve_bandwidth(ps, pt, bandwidth)

    def build(t):
        pv = param_vars(t, params.n_layers)
        return _align_tape(_proba(mlp_logits(t.input("x_s"), pv)), _proba(mlp_logits(t.input("x_t"), pv)), t.input("c"))

    inputs = params.as_dict() | {"x_s": np.asarray(x_s, dtype=np.float64), "x_t": np.asarray(x_t, dtype=np.float64),
                                 "c": _kernel_input(sigma)}
    return _eval_tape(build, inputs)


def loss_total(components, weights: LossWeights) -> LossBreakdown:
    """Weighted sum of ``(l_src, l_adv, l_cons, l_align)``."""
    if isinstance(components, dict):
        components = [components[k] for k in TERMS]
    vals = [float(c) for c in components]
    for name, v in zip(TERMS, vals):
        if not np.isfinite(v):
            raise TrainingError("non-finite loss component", term=name)
    # round-off in the MMD estimate can dip a hair below zero
    vals = [0.0 if -1e-12 < v < 0.0 else v for v in vals]
    l_src, l_adv, l_cons, l_align = vals
    total = l_src + weights.lambda_adv * l_adv + weights.lambda_cons * l_cons + weights.lambda_align * l_align
    return LossBreakdown(l_src, l_adv, l_cons, l_align, total)


# -- objective used by the trainer -------------------------------------------

def objective_inputs(params: ModelParams, x_s, y_s, x_off, x_t, x_on_s, x_on_t, bandwidth="median") -> dict:
    sigma = _resolve_bandwidth(predict_proba(params, x_s), predict_proba(params, x_t), bandwidth)
    return {
        "x_s": x_s, "onehot_s": _labels(y_s, params.n_classes), "x_off": x_off, "x_t": x_t,
        "x_on_s": x_on_s, "x_on_t": x_on_t, "neg_inv_2s2": _kernel_input(sigma),
    }


def objective(params: ModelParams, tape: gc.Tape, inputs: dict, weights: LossWeights):
    """Evaluate the objective tape; returns ``(LossBreakdown, grads)``."""
    values, grads = param_gradient(params, tape, inputs)
    breakdown = loss_total({k: float(values[k]) for k in TERMS}, weights)
    return breakdown, grads
