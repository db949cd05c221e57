"""Feed-forward classifier f: R^d -> R^C built on :mod:`maada.gradcore`.

Hidden layers use the rectifier, the output layer is linear (logits).
Whenever the losses compare outputs ``f(x)`` they compare softmax
probabilities, not logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gradcore as gc
from .errors import ConfigError, DataError, DimensionError, TrainingError


@dataclass
class ModelParams:
    weights: list  # fan_in x fan_out arrays
    biases: list  # length fan_out vectors

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError(f"layer {i}: weight {w.shape} and bias {b.shape} do not match")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise DimensionError(f"layer {i} fan_in {w.shape[0]} != previous fan_out")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise TrainingError("non-finite parameter", term=f"layer{i}")

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def n_classes(self):
        return self.weights[-1].shape[1]

    def names(self):
        out = []
        for i in range(self.n_layers):
            out += [f"W{i}", f"b{i}"]
        return out

    def as_dict(self):
        d = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            d[f"W{i}"] = w
            d[f"b{i}"] = b
        return d

    def copy(self):
        return ModelParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    @classmethod
    def from_flat(cls, layer_sizes, flat):
        flat = np.asarray(flat, dtype=np.float64)
        weights, biases, pos = [], [], 0
        for fi, fo in zip(layer_sizes[:-1], layer_sizes[1:]):
            weights.append(flat[pos:pos + fi * fo].reshape(fi, fo).copy())
            pos += fi * fo
            biases.append(flat[pos:pos + fo].copy())
            pos += fo
        if pos != flat.size:
            raise DimensionError(f"flat vector has {flat.size} values, shapes need {pos}")
        return cls(weights, biases)

    def apply_update(self, grads: dict, lr: float) -> "ModelParams":
        weights = [w - lr * grads[f"W{i}"] for i, w in enumerate(self.weights)]
        biases = [b - lr * grads[f"b{i}"] for i, b in enumerate(self.biases)]
        return ModelParams(weights, biases)


def init_mlp(layer_sizes, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    sizes = list(layer_sizes) if layer_sizes is not None else []
    if len(sizes) < 2 or any(int(s) != s or s < 1 for s in sizes):
        raise ConfigError(f"layer_sizes must list at least two positive integers, got {layer_sizes!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for fi, fo in zip(sizes[:-1], sizes[1:]):
        s = np.sqrt(6.0 / (fi + fo))
        weights.append(rng.uniform(-s, s, size=(int(fi), int(fo))))
        biases.append(np.zeros(int(fo)))
    return ModelParams(weights, biases)


def zero_params(layer_sizes) -> ModelParams:
    sizes = list(layer_sizes)
    return ModelParams([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                       [np.zeros(b) for b in sizes[1:]])


# -- tape builders -----------------------------------------------------------

def param_vars(tape: gc.Tape, n_layers: int):
    return [(tape.input(f"W{i}"), tape.input(f"b{i}")) for i in range(n_layers)]


def mlp_logits(x: gc.Var, pvars) -> gc.Var:
    h = x
    for i, (w, b) in enumerate(pvars):
        h = h @ w + b
        if i < len(pvars) - 1:
            h = gc.relu(h)
    return h


def log_softmax(z: gc.Var) -> gc.Var:
    return z - gc.logsumexp(z, axis=1)


def ce_rows(logits: gc.Var, onehot: gc.Var) -> gc.Var:
    """Per-row negative log-likelihood, shape (batch,)."""
    return -((onehot * log_softmax(logits)).sum(axis=1))


def entropy_rows(logits: gc.Var) -> gc.Var:
    lp = log_softmax(logits)
    return -((gc.exp(lp) * lp).sum(axis=1))


def _ce_tape(n_layers, reduce="mean"):
    tape = gc.Tape()
    pv = param_vars(tape, n_layers)
    rows = ce_rows(mlp_logits(tape.input("x"), pv), tape.input("onehot"))
    tape.set_result(rows.mean() if reduce == "mean" else rows.sum())
    return tape


def _entropy_tape(n_layers):
    tape = gc.Tape()
    pv = param_vars(tape, n_layers)
    tape.set_result(entropy_rows(mlp_logits(tape.input("x"), pv)).sum())
    return tape


_TAPES: dict = {}


def _cached(kind, n_layers):
    key = (kind, n_layers)
    if key not in _TAPES:
        if kind == "ce_mean":
            _TAPES[key] = _ce_tape(n_layers, "mean")
        elif kind == "ce_sum":
            _TAPES[key] = _ce_tape(n_layers, "sum")
        else:
            _TAPES[key] = _entropy_tape(n_layers)
    return _TAPES[key]


# -- numeric API -------------------------------------------------------------

def _check_x(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.layer_sizes[0]:
        raise DimensionError(f"input has shape {x.shape}, model expects width {params.layer_sizes[0]}")
    return x


def onehot(y, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError("labels must be a 1-D sequence")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes}), got range [{y.min()}, {y.max()}]")
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y.astype(int)] = 1.0
    return out


def logits(params: ModelParams, x) -> np.ndarray:
    h = _check_x(params, x)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < params.n_layers - 1:
            h = np.maximum(h, 0.0)
    return h


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(params: ModelParams, x) -> np.ndarray:
    return softmax(logits(params, x))


def _inputs(params, x, y=None):
    d = params.as_dict()
    d["x"] = x
    if y is not None:
        d["onehot"] = onehot(y, params.n_classes)
    return d


def cross_entropy(params: ModelParams, x, y) -> float:
    x = _check_x(params, x)
    y = np.asarray(y)
    if y.shape != (x.shape[0],):
        raise DataError(f"{y.shape[0] if y.ndim else 0} labels for {x.shape[0]} points")
    if x.shape[0] == 0:
        raise DataError("empty batch")
    return float(gc.forward_eval(_cached("ce_mean", params.n_layers), _inputs(params, x, y)))


def input_gradients(params: ModelParams, x, y) -> np.ndarray:
    """Row i is the gradient of the loss at (x_i, y_i) w.r.t. x_i.

    Rows do not interact in the network, so the gradient of the summed loss
    separates into per-point gradients.
    """
    x = _check_x(params, x)
    tape = _cached("ce_sum", params.n_layers)
    return gc.backward_grad(tape, _inputs(params, x, np.asarray(y)), ["x"])["x"]


def entropy_input_gradients(params: ModelParams, x) -> np.ndarray:
    """Per-row gradient of the prediction entropy (label-free surrogate loss)."""
    x = _check_x(params, x)
    return gc.backward_grad(_cached("entropy", params.n_layers), _inputs(params, x), ["x"])["x"]


def input_gradient(params: ModelParams, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("input_gradient takes a single point")
    return input_gradients(params, x[None, :], np.array([int(y)]))[0]


def param_gradient(params: ModelParams, tape: gc.Tape, inputs: dict):
    """Differentiate ``tape``'s scalar result w.r.t. every parameter.

    ``inputs`` binds the tape's data inputs (batches, perturbed batches,
    constants); the parameters are bound from ``params``. Returns
    ``(values, grads)`` as :func:`gradcore.value_and_grad` does.
    """
    bound = dict(inputs)
    bound.update(params.as_dict())
    values, grads = gc.value_and_grad(tape, bound, params.names())
    if not np.isfinite(values["result"]):
        bad = [k for k, v in values.items() if not np.all(np.isfinite(v))]
        raise TrainingError("non-finite loss", term=bad[0] if bad else "result")
    return values, grads


def ce_param_gradient(params: ModelParams, x, y):
    """Loss and parameter gradient of the plain source cross-entropy."""
    x = _check_x(params, x)
    return param_gradient(params, _cached("ce_mean", params.n_layers), {"x": x, "onehot": onehot(y, params.n_classes)})
