"""Independent reference computations shared by the tests."""
import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull

from swarmplan.geom2d import Disk, Polygon


def random_polygon(rng, center=(0.0, 0.0), scale=1.0, n_points=8):
    """Convex hull of random points; scipy returns 2-D hull vertices counter-clockwise."""
    pts = rng.uniform(-scale, scale, size=(n_points, 2)) + np.asarray(center)
    hull = ConvexHull(pts)
    return Polygon(pts[hull.vertices])


def _core_support_value(shape, u):
    if isinstance(shape, Polygon):
        return float(np.max(shape.vertices @ u))
    c = shape.center if isinstance(shape, Disk) else shape.position
    return float(c @ u)


def oracle_sdf(a, b, n_dirs=3600):
    """sd(a, b) = max_u -(h_a(u) + h_b(-u)) over unit u, radii folded in.

    Brute force sweep over directions followed by a bounded 1-D refinement.
    """

    def f(theta):
        u = np.array([np.cos(theta), np.sin(theta)])
        return _core_support_value(a, u) + _core_support_value(b, -u)

    thetas = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
    vals = np.array([f(t) for t in thetas])
    k = int(np.argmin(vals))
    step = 2 * np.pi / n_dirs
    res = minimize_scalar(f, bounds=(thetas[k] - step, thetas[k] + step), method="bounded",
                          options={"xatol": 1e-12})
    best = min(vals[k], res.fun)
    return -best - getattr(a, "radius", 0.0) - getattr(b, "radius", 0.0)


def boundary_samples(poly, step=1e-3):
    """Points along the polygon boundary spaced at most ``step`` apart."""
    V = poly.vertices
    out = []
    for a, b in zip(V, np.roll(V, -1, axis=0)):
        n = max(int(np.ceil(np.linalg.norm(b - a) / step)), 1)
        t = np.arange(n)[:, None] / n
        out.append(a + t * (b - a))
    return np.vstack(out)


def separating_axis_exists(p, q):
    """Separating-axis test on edge normals: True iff the interiors are disjoint."""
    for poly in (p, q):
        V = poly.vertices
        E = np.roll(V, -1, axis=0) - V
        for e in E:
            n = np.array([e[1], -e[0]])
            if np.max(p.vertices @ n) <= np.min(q.vertices @ n) or np.max(q.vertices @ n) <= np.min(p.vertices @ n):
                return True
    return False


def random_spd(rng, max_cond=1e6, scale=1.0):
    """SPD matrix with random orientation and condition number <= max_cond."""
    theta = rng.uniform(0, np.pi)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    lo = rng.uniform(0.05, 5.0) * scale
    hi = lo * np.exp(rng.uniform(0, np.log(max_cond)))
    return R @ np.diag([lo, hi]) @ R.T


def eig_sqrt(m):
    w, V = np.linalg.eigh(m)
    return V @ np.diag(np.sqrt(w)) @ V.T


def w2_reference(m1, s1, m2, s2):
    """Gaussian W2 through eigendecomposition square roots."""
    r1 = eig_sqrt(s1)
    cross = eig_sqrt(r1 @ s2 @ r1)
    val = np.sum((np.asarray(m1) - m2) ** 2) + np.trace(s1 + s2 - 2 * cross)
    return float(np.sqrt(max(val, 0.0)))


def empirical_w2(x, y):
    """Exact discrete W2 between two equal-size point clouds (assignment problem)."""
    from scipy.optimize import linear_sum_assignment
    from scipy.spatial.distance import cdist

    C = cdist(x, y, "sqeuclidean")
    r, c = linear_sum_assignment(C)
    return float(np.sqrt(C[r, c].mean()))


def cvar_by_integration(mu, sigma, alpha):
    """Upper-tail CVaR of N(mu, sigma^2): mean of the loss over its worst alpha mass.

    The quantile is found by root bracketing on the CDF and the tail
    expectation by quadrature, so no inverse-normal routine is involved.
    """
    from scipy.integrate import quad
    from scipy.optimize import brentq
    from scipy.special import erfc

    if alpha == 1.0:
        return mu
    cdf = lambda z: 0.5 * erfc(-z / np.sqrt(2))  # noqa: E731
    z = brentq(lambda z: cdf(z) - (1 - alpha), -40, 40, xtol=1e-14)
    dens = lambda z: np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)  # noqa: E731
    tail, _ = quad(lambda u: u * dens(u), z, np.inf, epsabs=1e-13, epsrel=1e-13)
    return mu + sigma * tail / alpha


def brute_force_shortest(adjacency, src, dst):
    """Cheapest simple path by exhaustive DFS; costs summed from the source end."""
    best = (np.inf, None)

    def walk(node, cost, path, seen):
        nonlocal best
        if node == dst:
            if cost < best[0]:
                best = (cost, list(path))
            return
        for nxt, w in adjacency[node].items():
            if nxt not in seen:
                seen.add(nxt)
                path.append(nxt)
                walk(nxt, cost + w, path, seen)
                path.pop()
                seen.discard(nxt)

    walk(src, 0.0, [src], {src})
    return best


def transport_vertices(w0, wf):
    """All vertices of the (uncapacitated) transportation polytope.

    A vertex is a basic feasible solution: a set of cells whose columns in
    the marginal constraint matrix are independent and whose unique
    solution is non-negative.
    """
    from itertools import combinations

    m, n = len(w0), len(wf)
    A = np.zeros((m + n, m * n))
    for i in range(m):
        for j in range(n):
            A[i, i * n + j] = 1.0
            A[m + j, i * n + j] = 1.0
    rhs = np.concatenate([w0, wf])
    rank = m + n - 1
    out = []
    for cells in combinations(range(m * n), rank):
        sub = A[:, cells]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        x, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.max(np.abs(sub @ x - rhs)) > 1e-12 or np.any(x < -1e-12):
            continue
        lam = np.zeros(m * n)
        lam[list(cells)] = np.maximum(x, 0.0)
        out.append(lam.reshape(m, n))
    return out


def lp_by_vertex_enumeration(costs, w0, wf):
    """Minimum objective over all polytope vertices and one optimal vertex."""
    best, arg = np.inf, None
    for lam in transport_vertices(np.asarray(w0, float), np.asarray(wf, float)):
        val = float(np.sum(lam * costs))
        if val < best:
            best, arg = val, lam
    return best, arg
