"""Tape-based reverse-mode differentiation over float64 numpy arrays.

A :class:`Tape` is a static, ordered record of primitive operations. It is
built once (symbolically, through :class:`Var` handles) and then replayed on
concrete inputs by :func:`forward_eval` / :func:`backward_grad`. Replaying the
same tape on the same inputs is bitwise reproducible: the forward pass walks
the records in order and the backward pass accumulates in reverse record
order.

Only the primitives needed by a small MLP and its losses are supported.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, EvaluationError

__all__ = [
    "Tape",
    "Var",
    "as_matrix",
    "forward_eval",
    "evaluate_outputs",
    "backward_grad",
    "value_and_grad",
    "finite_diff_grad",
    "exp",
    "log",
    "relu",
    "square",
    "logsumexp",
    "concat_rows",
]


def as_matrix(value, name="value"):
    """Copy ``value`` into a finite float64 array, rejecting NaN/Inf."""
    arr = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{name} contains non-finite entries")
    return arr


class Var:
    """Symbolic handle to one record on a tape."""

    __slots__ = ("tape", "index")

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    def _lift(self, other):
        if isinstance(other, Var):
            if other.tape is not self.tape:
                raise ContractError("operands belong to different tapes")
            return other
        return self.tape.const(other)

    def __add__(self, other):
        return self.tape._push("add", (self.index, self._lift(other).index))

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape._push("sub", (self.index, self._lift(other).index))

    def __rsub__(self, other):
        return self.tape._push("sub", (self._lift(other).index, self.index))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.tape._push("scale", (self.index,), float(other))
        return self.tape._push("mul", (self.index, self._lift(other).index))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return self.tape._push("scale", (self.index,), -1.0)

    def __matmul__(self, other):
        return self.tape._push("matmul", (self.index, self._lift(other).index))

    @property
    def T(self):
        return self.tape._push("transpose", (self.index,))

    def sum(self, axis=None, keepdims=False):
        return self.tape._push("sum", (self.index,), (axis, keepdims))

    def mean(self, axis=None, keepdims=False):
        return self.tape._push("mean", (self.index,), (axis, keepdims))

    def __repr__(self):
        op = self.tape.ops[self.index]
        return f"Var(#{self.index}, {op})"


def exp(a: Var) -> Var:
    return a.tape._push("exp", (a.index,))


def log(a: Var) -> Var:
    return a.tape._push("log", (a.index,))


def relu(a: Var) -> Var:
    """Elementwise max(a, 0); the subgradient at 0 is 0."""
    return a.tape._push("relu", (a.index,))


def square(a: Var) -> Var:
    return a.tape._push("square", (a.index,))


def logsumexp(a: Var, axis=1) -> Var:
    """Row-wise (by default) log-sum-exp, kept as a column."""
    return a.tape._push("logsumexp", (a.index,), axis)


def concat_rows(a: Var, b: Var) -> Var:
    return a.tape._push("concat_rows", (a.index, a._lift(b).index))


class Tape:
    """Ordered record of primitive operations.

    Records are appended by the :class:`Var` operators, so every operand
    precedes its consumer by construction.
    """

    def __init__(self):
        self.ops: list[str] = []
        self.args: list[tuple] = []
        self.params: list = []
        self.input_names: dict[str, int] = {}
        self.outputs: dict[str, int] = {}
        self.result: int | None = None

    def __len__(self):
        return len(self.ops)

    def _push(self, op, args, param=None):
        self.ops.append(op)
        self.args.append(tuple(args))
        self.params.append(param)
        return Var(self, len(self.ops) - 1)

    def input(self, name: str) -> Var:
        if name in self.input_names:
            return Var(self, self.input_names[name])
        v = self._push("input", (), name)
        self.input_names[name] = v.index
        return v

    def const(self, value) -> Var:
        return self._push("const", (), as_matrix(value, "constant"))

    def mark(self, name: str, var: Var) -> Var:
        """Name an intermediate so :func:`evaluate_outputs` reports it."""
        self.outputs[name] = var.index
        return var

    def set_result(self, var: Var) -> Var:
        self.result = var.index
        return var


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _forward_values(tape: Tape, inputs: dict) -> list:
    missing = [n for n in tape.input_names if n not in inputs]
    if missing:
        raise ContractError(f"unbound tape inputs: {sorted(missing)}")
    vals: list = [None] * len(tape.ops)
    for i, (op, args, p) in enumerate(zip(tape.ops, tape.args, tape.params)):
        a = [vals[j] for j in args]
        try:
            if op == "input":
                v = np.asarray(inputs[p], dtype=np.float64)
            elif op == "const":
                v = p
            elif op == "add":
                v = a[0] + a[1]
            elif op == "sub":
                v = a[0] - a[1]
            elif op == "mul":
                v = a[0] * a[1]
            elif op == "scale":
                v = a[0] * p
            elif op == "matmul":
                if a[0].ndim != 2 or a[1].ndim != 2:
                    raise ValueError(f"matmul needs 2-D operands, got {a[0].shape} and {a[1].shape}")
                v = a[0] @ a[1]
            elif op == "transpose":
                v = a[0].T
            elif op == "exp":
                v = np.exp(a[0])
            elif op == "log":
                v = np.log(a[0])
            elif op == "relu":
                v = np.maximum(a[0], 0.0)
            elif op == "square":
                v = a[0] * a[0]
            elif op == "sum":
                v = np.sum(a[0], axis=p[0], keepdims=p[1])
            elif op == "mean":
                v = np.mean(a[0], axis=p[0], keepdims=p[1])
            elif op == "logsumexp":
                m = np.max(a[0], axis=p, keepdims=True)
                v = m + np.log(np.sum(np.exp(a[0] - m), axis=p, keepdims=True))
            elif op == "concat_rows":
                v = np.concatenate([a[0], a[1]], axis=0)
            else:  # pragma: no cover - records are only created by this module
                raise ContractError(f"unknown op {op!r}")
        except ValueError as exc:
            raise DimensionError(f"{op} (record {i}): {exc}") from None
        vals[i] = v
    return vals


def forward_eval(tape: Tape, inputs: dict, output: str | None = None):
    """Evaluate the tape's result (or a marked output) on ``inputs``."""
    vals = _forward_values(tape, inputs)
    idx = tape.result if output is None else tape.outputs[output]
    if idx is None:
        idx = len(vals) - 1
    return vals[idx]


def evaluate_outputs(tape: Tape, inputs: dict) -> dict:
    vals = _forward_values(tape, inputs)
    return {name: vals[i] for name, i in tape.outputs.items()}


def value_and_grad(tape: Tape, inputs: dict, wrt):
    """Forward pass plus reverse sweep from the scalar result.

    Returns ``(values, grads)`` where ``values`` maps every marked output
    (and ``"result"``) to its value and ``grads`` maps each name in ``wrt``
    to an array shaped like that input.
    """
    vals = _forward_values(tape, inputs)
    root = tape.result if tape.result is not None else len(vals) - 1
    out = vals[root]
    if np.ndim(out) != 0 and np.size(out) != 1:
        raise ContractError(f"backward needs a scalar result, got shape {np.shape(out)}")

    grads: list = [None] * len(vals)
    grads[root] = np.ones_like(out)

    def acc(j, g):
        if grads[j] is None:
            grads[j] = g
        else:
            grads[j] = grads[j] + g

    for i in range(root, -1, -1):
        g = grads[i]
        if g is None:
            continue
        op = tape.ops[i]
        args = tape.args[i]
        if op in ("input", "const"):
            continue
        a = [vals[j] for j in args]
        if op == "add":
            acc(args[0], _unbroadcast(g, a[0].shape))
            acc(args[1], _unbroadcast(g, a[1].shape))
        elif op == "sub":
            acc(args[0], _unbroadcast(g, a[0].shape))
            acc(args[1], _unbroadcast(-g, a[1].shape))
        elif op == "mul":
            acc(args[0], _unbroadcast(g * a[1], a[0].shape))
            acc(args[1], _unbroadcast(g * a[0], a[1].shape))
        elif op == "scale":
            acc(args[0], g * tape.params[i])
        elif op == "matmul":
            acc(args[0], g @ a[1].T)
            acc(args[1], a[0].T @ g)
        elif op == "transpose":
            acc(args[0], g.T)
        elif op == "exp":
            acc(args[0], g * vals[i])
        elif op == "log":
            acc(args[0], g / a[0])
        elif op == "relu":
            acc(args[0], g * (a[0] > 0.0))
        elif op == "square":
            acc(args[0], 2.0 * a[0] * g)
        elif op in ("sum", "mean"):
            axis, keepdims = tape.params[i]
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(g, axis)
            gg = np.broadcast_to(gg, a[0].shape)
            if op == "mean":
                count = a[0].size if axis is None else a[0].shape[axis]
                gg = gg / count
            acc(args[0], np.array(gg))
        elif op == "logsumexp":
            acc(args[0], g * np.exp(a[0] - vals[i]))
        elif op == "concat_rows":
            n0 = a[0].shape[0]
            acc(args[0], g[:n0])
            acc(args[1], g[n0:])

    result = {name: vals[i] for name, i in tape.outputs.items()}
    result["result"] = out
    out_grads = {}
    for name in wrt:
        if name not in tape.input_names:
            raise ContractError(f"{name!r} is not an input of this tape")
        j = tape.input_names[name]
        g = grads[j]
        out_grads[name] = np.zeros_like(vals[j]) if g is None else np.asarray(g, dtype=np.float64).reshape(vals[j].shape)
    return result, out_grads


def backward_grad(tape: Tape, inputs: dict, wrt) -> dict:
    return value_and_grad(tape, inputs, wrt)[1]


def finite_diff_grad(fn, x, h=1e-5):
    """Central-difference gradient of scalar ``fn`` at ``x``."""
    if not h > 0:
        raise ContractError("finite-difference step must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(fn(x))
        flat[i] = orig - h
        fm = float(fn(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"function is non-finite near coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
