"""A short walk through the building blocks on hand-sized inputs.

Run with ``python demos/quick_tour.py``.
"""
import numpy as np

from swarmplan.gaussian import Gaussian2D, ot_map, w2_distance, w2_geodesic
from swarmplan.geom2d import Disk, Polygon, signed_distance
from swarmplan.risk import RiskParams, cvar_coefficient, in_free, sdf_distribution
from swarmplan.transport import transport_simplex

box = Polygon.box(10, 0, 14, 10)

# Signed distance of a robot-sized disk to a box, and the contact normal.
res = signed_distance(Disk([5.0, 5.0], 0.2), box)
print(f"disk -> box: distance {res.signed_distance:.3f} m, normal {res.normal}")

# A Gaussian near the box: its linearized SDF is a scalar Gaussian.
g = Gaussian2D([6.0, 5.0], [[1.5, 0.3], [0.3, 0.8]])
eta = sdf_distribution(g, box)
print(f"negated SDF ~ N({eta.mean:.3f}, {eta.std:.3f}^2)")
for alpha in (0.01, 0.05, 0.2, 1.0):
    rp = RiskParams(alpha, -1.0)
    cvar = eta.mean + cvar_coefficient(alpha) * eta.std
    print(f"  alpha={alpha:<5} CVaR {cvar:+.3f}  free: {in_free(g, [box], rp)}")

# Wasserstein geometry: distance, geodesic midpoint and the OT map.
a = Gaussian2D([0, 0], np.eye(2))
b = Gaussian2D([4, 2], [[4, 1], [1, 2]])
mid = w2_geodesic(a, b, 0.5)
print(f"W2(a, b) = {w2_distance(a, b):.4f}; W2(a, mid) = {w2_distance(a, mid):.4f}")
print(f"OT map sends (1, 0) to {ot_map(a, b)(np.array([1.0, 0.0]))}")

# Transport between a two- and a three-component mixture.
costs = np.array([[1.0, 4.0, 6.0], [5.0, 2.0, 3.0]])
res = transport_simplex(costs, [0.4, 0.6], [0.3, 0.3, 0.4])
print("transport plan:\n", np.round(res.lam, 3), f"\ncost {res.objective:.3f}")
