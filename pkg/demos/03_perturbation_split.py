"""
Splitting a gradient into on- and off-manifold parts
====================================================

The loss gradient at a point is projected onto the local tangent chart.
The tangent part moves along the data; the rest moves away from it.
"""

import numpy as np

from maada import model
from maada.data import gen_two_moons
from maada.manifold import build_graph, tangent_basis
from maada.perturb import decompose, make_pair

ds = gen_two_moons(300, 0.05, seed=2)
params = model.init_mlp((2, 32, 32, 2), seed=0)
graph = build_graph(ds.X, k=10)

i = 17
chart = tangent_basis(ds.X, graph, i, m=1)
g = model.input_gradient(params, ds.X[i], ds.y[i])
on, off = decompose(g, chart)

print("gradient       ", g)
print("tangent part   ", on)
print("normal part    ", off)
print("<on, off>      ", float(on @ off))
print("on + off - g   ", on + off - g)

pair = make_pair(ds.X[i], on, off, alpha=0.1, beta=0.1)
print("|x_on - x|  =", np.linalg.norm(pair.x_on - ds.X[i]))
print("|x_off - x| =", np.linalg.norm(pair.x_off - ds.X[i]))
