"""Convex geometry in the plane: support maps, GJK distance and EPA depth.

Shapes are treated as a *core* (a polygon or a single point) swept by a disk
of some radius.  A disk is a point core with a positive radius, so
disk queries run GJK/EPA on the cores and fold the radii into the result.

The contact normal follows the convention ``n = sgn(d)(p_O - p)/|p_O - p|``:
it points from the query shape toward the obstacle when they are apart and
toward the interior when they overlap.  Moving the query shape along ``+n``
therefore *decreases* the signed distance, i.e. ``grad_p s = -n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConvexShape",
    "Polygon",
    "Disk",
    "Point",
    "SdfResult",
    "support",
    "signed_distance",
    "point_sdf_batch",
    "GJK_MAX_ITER",
    "EPA_MAX_ITER",
]

GJK_MAX_ITER = 64
EPA_MAX_ITER = 128
GJK_TOL = 1e-10
EPA_TOL = 1e-10
# below this core separation the shapes are handed to EPA
_CONTACT_EPS = 1e-12


class ConvexShape:
    """Base class for the convex shapes understood by the kernel."""

    radius: float = 0.0

    def support_xy(self, dx: float, dy: float) -> tuple[float, float]:
        raise NotImplementedError

    def core(self) -> "ConvexShape":
        return self

    def bounding_circle(self) -> tuple[np.ndarray, float]:
        raise NotImplementedError

    def translated(self, offset) -> "ConvexShape":
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Polygon(ConvexShape):
    """Convex polygon with counter-clockwise vertices (meters)."""

    vertices: np.ndarray
    _xy: tuple = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        e = np.roll(v, -1, axis=0) - v
        e_next = np.roll(e, -1, axis=0)
        cross = e[:, 0] * e_next[:, 1] - e[:, 1] * e_next[:, 0]
        scale = max(1.0, float(np.max(np.abs(v))))
        if np.any(cross < -1e-12 * scale**2):
            raise ValueError("polygon must be convex and counter-clockwise")
        area = 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))
        if area <= 1e-12 * scale**2:
            raise ValueError("degenerate polygon (zero area)")
        if np.any(np.linalg.norm(e, axis=1) <= 1e-12 * scale):
            raise ValueError("degenerate polygon (repeated vertex)")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "_xy", tuple((float(a), float(b)) for a, b in v))

    def support_xy(self, dx, dy):
        best = None
        best_dot = -math.inf
        for x, y in self._xy:
            dot = x * dx + y * dy
            if dot > best_dot:  # strict: ties keep the lowest index
                best_dot = dot
                best = (x, y)
        return best

    def bounding_circle(self):
        c = self.vertices.mean(axis=0)
        return c, float(np.max(np.linalg.norm(self.vertices - c, axis=1)))

    def translated(self, offset):
        return Polygon(self.vertices + np.asarray(offset, dtype=float))

    @classmethod
    def box(cls, xmin, ymin, xmax, ymax) -> "Polygon":
        return cls([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)])


@dataclass(frozen=True, eq=False)
class Point(ConvexShape):
    position: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(2)
        if not np.all(np.isfinite(p)):
            raise ValueError("point position must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)

    def support_xy(self, dx, dy):
        return float(self.position[0]), float(self.position[1])

    def bounding_circle(self):
        return self.position.copy(), 0.0

    def translated(self, offset):
        return Point(self.position + np.asarray(offset, dtype=float))


@dataclass(frozen=True, eq=False)
class Disk(ConvexShape):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(2)
        if not np.all(np.isfinite(c)):
            raise ValueError("disk center must be finite")
        if not self.radius >= 0.0:
            raise ValueError("disk radius must be >= 0")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def support_xy(self, dx, dy):
        n = math.hypot(dx, dy)
        return (float(self.center[0]) + self.radius * dx / n,
                float(self.center[1]) + self.radius * dy / n)

    def core(self):
        return Point(self.center)

    def bounding_circle(self):
        return self.center.copy(), self.radius

    def translated(self, offset):
        return Disk(self.center + np.asarray(offset, dtype=float), self.radius)


@dataclass(frozen=True)
class SdfResult:
    """Signed distance between a query shape and an obstacle.

    Attributes
    ----------
    signed_distance : float
        Positive separation or negative penetration depth (meters).
    closest_point : ndarray, shape (2,)
        Closest point on the obstacle, ``p_O``.
    normal : ndarray, shape (2,)
        Unit contact normal ``n``; ``grad s = -n`` with respect to the query.
    query_point : ndarray, shape (2,)
        Reference point ``p`` of the query shape (position, disk center, or
        the witness point on a polygon).
    """

    signed_distance: float
    closest_point: np.ndarray
    normal: np.ndarray
    query_point: np.ndarray


def support(shape: ConvexShape, direction) -> np.ndarray:
    """Point of ``shape`` that maximizes the dot product with ``direction``."""
    d = np.asarray(direction, dtype=float).reshape(2)
    if not np.all(np.isfinite(d)) or float(d @ d) == 0.0:
        raise ValueError("support direction must be non-zero")
    return np.array(shape.support_xy(float(d[0]), float(d[1])))


# -- GJK ---------------------------------------------------------------------
# Simplex vertices are tuples (wx, wy, ax, ay, bx, by) with w = a - b.


def _minkowski(A, B, dx, dy):
    ax, ay = A.support_xy(dx, dy)
    bx, by = B.support_xy(-dx, -dy)
    return (ax - bx, ay - by, ax, ay, bx, by)


def _closest_on_segment(P, Q):
    ex, ey = Q[0] - P[0], Q[1] - P[1]
    ee = ex * ex + ey * ey
    if ee == 0.0:
        return [P], (1.0,)
    t = -(P[0] * ex + P[1] * ey) / ee
    if t <= 0.0:
        return [P], (1.0,)
    if t >= 1.0:
        return [Q], (1.0,)
    return [P, Q], (1.0 - t, t)


def _combine(simplex, lam):
    vx = vy = ax = ay = bx = by = 0.0
    for s, l in zip(simplex, lam):
        vx += l * s[0]
        vy += l * s[1]
        ax += l * s[2]
        ay += l * s[3]
        bx += l * s[4]
        by += l * s[5]
    return (vx, vy), (ax, ay), (bx, by)


def _reduce(simplex):
    """Closest point of the simplex to the origin; returns (sub-simplex, weights)."""
    if len(simplex) == 1:
        return simplex, (1.0,)
    if len(simplex) == 2:
        return _closest_on_segment(simplex[0], simplex[1])
    P, Q, R = simplex
    c1 = (Q[0] - P[0]) * (-P[1]) - (Q[1] - P[1]) * (-P[0])
    c2 = (R[0] - Q[0]) * (-Q[1]) - (R[1] - Q[1]) * (-Q[0])
    c3 = (P[0] - R[0]) * (-R[1]) - (P[1] - R[1]) * (-R[0])
    if (c1 >= 0 and c2 >= 0 and c3 >= 0) or (c1 <= 0 and c2 <= 0 and c3 <= 0):
        area = (Q[0] - P[0]) * (R[1] - P[1]) - (Q[1] - P[1]) * (R[0] - P[0])
        if area != 0.0:
            # origin inside: barycentric weights from sub-areas
            return simplex, (c2 / area, c3 / area, c1 / area)
    best = None
    for a, b in ((P, Q), (Q, R), (R, P)):
        sub, lam = _closest_on_segment(a, b)
        (vx, vy), _, _ = _combine(sub, lam)
        dist2 = vx * vx + vy * vy
        if best is None or dist2 < best[0]:
            best = (dist2, sub, lam)
    return best[1], best[2]


def _gjk(A, B):
    """Distance between cores; returns (dist, a, b, simplex) or (0, .., simplex3)."""
    ax, ay = A.support_xy(1.0, 0.0)
    bx, by = B.support_xy(-1.0, 0.0)
    simplex = [(ax - bx, ay - by, ax, ay, bx, by)]
    lam = (1.0,)
    v, a, b = _combine(simplex, lam)
    vnorm = math.hypot(*v)
    for _ in range(GJK_MAX_ITER):
        if vnorm <= _CONTACT_EPS:
            return 0.0, a, b, simplex
        w = _minkowski(A, B, -v[0], -v[1])
        # upper - lower bound on the distance
        if vnorm - (v[0] * w[0] + v[1] * w[1]) / vnorm <= GJK_TOL:
            break
        if any(w[0] == s[0] and w[1] == s[1] for s in simplex):
            break
        simplex, lam = _reduce(simplex + [w])
        v_new, a_new, b_new = _combine(simplex, lam)
        vn_new = math.hypot(*v_new)
        if len(simplex) == 3:
            return 0.0, a_new, b_new, simplex
        improved = vnorm - vn_new
        v, a, b, vnorm = v_new, a_new, b_new, vn_new
        if improved < GJK_TOL:
            break
    return vnorm, a, b, simplex


# -- EPA ---------------------------------------------------------------------


def _initial_polytope(A, B, simplex):
    pts = list(simplex)
    if len(pts) == 1:
        pts.append(_minkowski(A, B, -pts[0][0] or 1.0, -pts[0][1]))
        if pts[1][:2] == pts[0][:2]:
            pts[1] = _minkowski(A, B, 1.0, 0.0)
            if pts[1][:2] == pts[0][:2]:
                pts[1] = _minkowski(A, B, -1.0, 0.0)
    if len(pts) == 2:
        ex, ey = pts[1][0] - pts[0][0], pts[1][1] - pts[0][1]
        if ex == 0.0 and ey == 0.0:
            ex, ey = 1.0, 0.0
        for dx, dy in ((-ey, ex), (ey, -ex)):
            w = _minkowski(A, B, dx, dy)
            if abs((w[0] - pts[0][0]) * ey - (w[1] - pts[0][1]) * ex) > 1e-14:
                pts.append(w)
                break
    if len(pts) < 3:
        return None
    P, Q, R = pts[:3]
    area = (Q[0] - P[0]) * (R[1] - P[1]) - (Q[1] - P[1]) * (R[0] - P[0])
    if area < 0:
        pts = [P, R, Q]
    return pts


def _epa(A, B, simplex):
    """Penetration depth of overlapping cores.

    Returns (depth, nx, ny, a, b): the origin-nearest boundary point of the
    Minkowski difference A - B is ``depth * n`` with witnesses ``a - b``.
    """
    poly = _initial_polytope(A, B, simplex)
    if poly is None:
        # both cores are the same single point
        p = simplex[0]
        return 0.0, 1.0, 0.0, (p[2], p[3]), (p[4], p[5])
    best = None
    for _ in range(EPA_MAX_ITER):
        best = None
        m = len(poly)
        for i in range(m):
            P, Q = poly[i], poly[(i + 1) % m]
            ex, ey = Q[0] - P[0], Q[1] - P[1]
            el = math.hypot(ex, ey)
            if el == 0.0:
                continue
            nx, ny = ey / el, -ex / el
            dist = nx * P[0] + ny * P[1]
            if best is None or dist < best[0]:
                best = (dist, nx, ny, i)
        dist, nx, ny, i = best
        w = _minkowski(A, B, nx, ny)
        if (nx * w[0] + ny * w[1]) - dist < EPA_TOL:
            break
        poly.insert(i + 1, w)
    dist, nx, ny, i = best
    P, Q = poly[i], poly[(i + 1) % len(poly)]
    ex, ey = Q[0] - P[0], Q[1] - P[1]
    ee = ex * ex + ey * ey
    t = ((dist * nx - P[0]) * ex + (dist * ny - P[1]) * ey) / ee
    t = min(1.0, max(0.0, t))
    _, a, b = _combine([P, Q], (1.0 - t, t))
    return max(dist, 0.0), nx, ny, a, b


def signed_distance(a: ConvexShape, b: ConvexShape) -> SdfResult:
    """Signed distance from query shape ``a`` to obstacle ``b``.

    Positive values are the smallest translation that makes the shapes touch,
    negative values the smallest translation that separates them.  Disk radii
    are folded into the core distance.
    """
    A, B = a.core(), b.core()
    ra, rb = a.radius, b.radius
    dist, pa, pb, simplex = _gjk(A, B)
    if dist > _CONTACT_EPS:
        ux, uy = (pb[0] - pa[0]) / dist, (pb[1] - pa[1]) / dist
        d = dist - ra - rb
        p_o = np.array([pb[0] - rb * ux, pb[1] - rb * uy])
        return SdfResult(d, p_o, np.array([ux, uy]), np.array(pa))
    depth, nx, ny, pa, pb = _epa(A, B, simplex)
    d = -depth - ra - rb
    p_o = np.array([pb[0] + rb * nx, pb[1] + rb * ny])
    return SdfResult(d, p_o, np.array([nx, ny]), np.array(pa))


def point_sdf_batch(points, polygon: Polygon):
    """Exact signed distance of many points to one convex polygon.

    Vectorized companion of :func:`signed_distance` for the simulation hot
    loop.

    Parameters
    ----------
    points : array-like, shape (m, 2)
    polygon : Polygon

    Returns
    -------
    sd : ndarray, shape (m,)
        Signed distance of each point.
    grad : ndarray, shape (m, 2)
        Unit gradient of the signed distance (``-n`` in contact-normal terms).
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    V = polygon.vertices
    E = np.roll(V, -1, axis=0) - V
    L = np.linalg.norm(E, axis=1)
    N_out = np.stack([E[:, 1], -E[:, 0]], axis=1) / L[:, None]

    rel = P[:, None, :] - V[None, :, :]  # (m, k, 2)
    t = np.clip(np.einsum("mkj,kj->mk", rel, E) / (L**2)[None, :], 0.0, 1.0)
    closest = V[None, :, :] + t[..., None] * E[None, :, :]
    diff = P[:, None, :] - closest
    dist = np.linalg.norm(diff, axis=2)
    k_min = np.argmin(dist, axis=1)
    rows = np.arange(P.shape[0])
    d_out = dist[rows, k_min]

    plane = np.einsum("mkj,kj->mk", rel, N_out)
    inside = np.all(plane <= 0.0, axis=1)
    k_in = np.argmax(plane, axis=1)

    sd = np.where(inside, plane[rows, k_in], d_out)
    with np.errstate(invalid="ignore", divide="ignore"):
        g_out = diff[rows, k_min] / d_out[:, None]
    grad = np.where(inside[:, None] | (d_out[:, None] == 0.0), N_out[k_in], g_out)
    return sd, grad
