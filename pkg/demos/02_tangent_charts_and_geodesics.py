"""
Tangent charts and graph geodesics
==================================

On a sampled circle the neighbor graph recovers arc length, and local PCA
recovers the tangent direction. GeoD then compares two point clouds.
"""

import numpy as np

from maada.data import gen_circle, gen_two_moons, rotate
from maada.manifold import build_graph, geo_discrepancy, geodesic_from, tangent_basis

circle = gen_circle(500, 1.0, seed=0)
graph = build_graph(circle.X, k=5)

# point 250 sits opposite point 0, so the shortest path is half the circle
d = geodesic_from(graph, 0)
print(f"antipodal graph distance {d[250]:.4f}  (pi = {np.pi:.4f})")

# the tangent at (1, 0) should be vertical
east = int(np.argmin(np.linalg.norm(circle.X - [1.0, 0.0], axis=1)))
chart = tangent_basis(circle.X, graph, east, m=1)
print("tangent at east pole:", np.round(chart.basis[:, 0], 4))
print("neighborhood spectrum:", np.round(chart.spectrum, 6))

# GeoD grows as the target moons rotate away from the source
src = gen_two_moons(400, 0.1, seed=0).X
for deg in (0, 15, 30, 45):
    tgt = rotate(gen_two_moons(400, 0.1, seed=1000), np.deg2rad(deg)).X
    r = geo_discrepancy(src, tgt, k=10, m=1)
    print(f"{deg:>2} deg  supinf {r.supinf:.3f}  curvgap {r.curvgap:.3f}  total {r.total:.3f}")
