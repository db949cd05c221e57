"""
Checking the autodiff tape against finite differences
=====================================================

Build a tiny expression on a tape, differentiate it in reverse mode and
compare with central differences. Then do the same for a small MLP loss.
"""

import numpy as np

from maada import gradcore as gc
from maada import model

rng = np.random.default_rng(0)

# f(x, w) = mean(logsumexp(relu(x @ w)))
tape = gc.Tape()
x, w = tape.input("x"), tape.input("w")
tape.set_result(gc.logsumexp(gc.relu(x @ w), axis=1).mean())

inputs = {"x": rng.normal(size=(4, 3)), "w": rng.normal(size=(3, 5))}
values, grads = gc.value_and_grad(tape, inputs, ["w"])
fd = gc.finite_diff_grad(lambda W: gc.forward_eval(tape, {"x": inputs["x"], "w": W}), inputs["w"])
print("f =", float(values["result"]))
print("max |analytic - finite diff| on w:", np.max(np.abs(grads["w"] - fd)))

# input gradient of the cross-entropy of a 2-16-2 network
params = model.init_mlp((2, 16, 2), seed=1)
X = rng.normal(size=(5, 2))
y = np.array([0, 1, 1, 0, 1])
G = model.input_gradients(params, X, y)
F = gc.finite_diff_grad(lambda Z: model.cross_entropy(params, Z, y) * len(y), X)
print("input-gradient relative error:", np.linalg.norm(G - F) / np.linalg.norm(F))
