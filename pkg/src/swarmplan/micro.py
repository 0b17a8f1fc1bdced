"""Per-robot tracking of the planned GMM trajectory.

Robots follow reference points given by the displacement interpolation of
each edge's Gaussian OT map and are steered by an artificial potential
field: a quadratic pull toward the reference plus inverse-distance barriers
around obstacles and neighbours, integrated as a single integrator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .gaussian import AffineMap, ot_map
from .geom2d import ConvexShape, Disk, Point, Polygon, point_sdf_batch, signed_distance
from .transport import GMM, GmmTrajectory, PairTrajectory, TransportPlan

__all__ = [
    "MicroParams",
    "RobotState",
    "SwarmTrajectories",
    "SimulationResult",
    "largest_remainder",
    "assign_robots",
    "reference_point",
    "apf_control",
    "simulate",
    "average_traj_length",
    "obstacle_sdf_batch",
]


@dataclass(frozen=True)
class MicroParams:
    """APF weights, barrier cutoff ``d0`` (m), gain, speed cap (m/s) and step (s)."""

    w1: float = 1.0
    w2: float = 1.0
    d0: float = 3.0
    k_rep: float = 0.5
    v_max: float = 5.0
    dt: float = 0.02
    eps: float = 1e-3

    def __post_init__(self):
        for name in ("w1", "w2", "d0", "k_rep", "v_max", "dt", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class RobotState:
    id: int
    position: np.ndarray
    radius: float
    pair: tuple[int, int]
    anchor: np.ndarray


@dataclass
class SwarmTrajectories:
    """Positions on a shared time grid, shape ``(steps + 1, N, 2)``."""

    positions: np.ndarray
    dt: float
    t0: float = 0.0

    @property
    def n_robots(self) -> int:
        return self.positions.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.positions.shape[0])


@dataclass
class SimulationResult:
    trajectories: SwarmTrajectories
    pairs: list[tuple[int, int]]
    min_obstacle_sdf: np.ndarray  # per time index, over robots and obstacles
    min_robot_distance: np.ndarray  # per time index, robot center distance
    robot_min_sdf: np.ndarray  # per robot, over the run
    obstacle_collisions: int  # (step, robot) samples with SDF < 0
    robot_overlaps: int  # (step, pair) samples closer than 2 radius
    radius: float
    events: list[str] = field(default_factory=list)


def largest_remainder(total: int, shares) -> np.ndarray:
    """Integer counts summing to ``total`` proportional to ``shares``.

    Remainders are handed out largest first; equal remainders go to the
    lower index.
    """
    shares = np.asarray(shares, dtype=float)
    s = shares.sum()
    if total == 0 or s <= 0:
        return np.zeros(len(shares), dtype=int)
    quota = total * shares / s
    counts = np.floor(quota + 1e-12).astype(int)
    rem = quota - counts
    order = sorted(range(len(shares)), key=lambda k: (-round(rem[k], 12), k))
    for k in order[: total - counts.sum()]:
        counts[k] += 1
    return counts


def _mahalanobis_sq(x: np.ndarray, mean, cov) -> np.ndarray:
    diff = x - mean
    return np.einsum("ni,ij,nj->n", diff, np.linalg.inv(cov), diff)


def assign_robots(
    initial_positions,
    initial_gmm: GMM,
    plan: TransportPlan,
    components: Sequence[int] | None = None,
) -> list[tuple[int, int]]:
    """Give every robot an (initial component, target component) pair.

    Component quotas come from largest-remainder rounding of ``N * w_i``;
    robots are matched to components greedily by Mahalanobis distance
    unless ``components`` already labels them (e.g. when the positions were
    drawn from the mixture).  Within a component, robots ordered by
    Mahalanobis radius are dealt to pairs so that every pair receives a
    radially stratified share of the component.
    """
    X = np.atleast_2d(np.asarray(initial_positions, dtype=float))
    N = X.shape[0]
    if N < 1:
        raise ValueError("need at least one robot")
    n1 = len(initial_gmm)
    maha = np.stack([_mahalanobis_sq(X, g.mean, g.cov) for g in initial_gmm.components], axis=1)

    if components is None:
        quota = largest_remainder(N, initial_gmm.weights)
        comp = np.full(N, -1)
        filled = np.zeros(n1, dtype=int)
        order = np.lexsort((np.repeat(np.arange(n1)[None, :], N, 0).ravel(),
                            np.repeat(np.arange(N), n1),
                            maha.ravel()))
        for flat in order:
            r, i = divmod(int(flat), n1)
            if comp[r] < 0 and filled[i] < quota[i]:
                comp[r] = i
                filled[i] += 1
    else:
        comp = np.asarray(components, dtype=int)
        if comp.shape != (N,):
            raise ValueError("components must label every robot")

    pairs: list[tuple[int, int] | None] = [None] * N
    lam = plan.lam
    for i in range(n1):
        members = np.flatnonzero(comp == i)
        if members.size == 0:
            continue
        row = lam[i]
        if row.sum() <= 0:
            raise ValueError(f"component {i} carries no mass in the plan")
        members = members[np.argsort(maha[members, i], kind="stable")]
        counts = largest_remainder(members.size, row)
        # deal robots so that every prefix is split close to proportionally
        given = np.zeros(len(row), dtype=int)
        for m, r in enumerate(members):
            target = (m + 1) * counts / members.size
            open_ = np.flatnonzero(given < counts)
            j = int(open_[np.argmax(target[open_] - given[open_])])
            given[j] += 1
            pairs[r] = (i, j)
    return pairs  # type: ignore[return-value]


def reference_point(pair: PairTrajectory, anchor, segment: int, tau: float,
                    maps: Sequence[AffineMap] | None = None) -> np.ndarray:
    """Displacement-interpolation reference ``(1 - tau) x + tau T(x)`` on one edge.

    ``anchor`` may be a single position or an ``(n, 2)`` array.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    x = np.asarray(anchor, dtype=float)
    if segment < 0 or pair.n_segments == 0:
        return x.copy()
    T = maps[segment] if maps is not None else ot_map(pair.nodes[segment], pair.nodes[segment + 1])
    return (1.0 - tau) * x + tau * T(x)


def _barrier(d, params: MicroParams):
    """Magnitude of the repulsive push for clearance ``d`` (zero beyond ``d0``)."""
    dc = np.maximum(d, params.eps)
    mag = params.w2 * params.k_rep * (1.0 / dc - 1.0 / params.d0) / dc**2
    return np.where(d < params.d0, mag, 0.0)


def _clamp(u: np.ndarray, v_max: float) -> np.ndarray:
    speed = np.linalg.norm(u, axis=-1, keepdims=True)
    scale = np.where(speed > v_max, v_max / np.maximum(speed, 1e-300), 1.0)
    return u * scale


def apf_control(
    robot: RobotState,
    x_ref,
    obstacles: Sequence[ConvexShape],
    neighbor_positions,
    params: MicroParams,
    events: list | None = None,
) -> np.ndarray:
    """Velocity command ``-grad(w1 U_att + w2 U_rep)`` clamped to ``v_max``."""
    x = np.asarray(robot.position, dtype=float)
    u = params.w1 * (np.asarray(x_ref, dtype=float) - x)
    body = Disk(x, robot.radius)
    for obs in obstacles:
        res = signed_distance(body, obs)
        d = res.signed_distance
        if d <= 0 and events is not None:
            events.append(f"robot {robot.id} collides with obstacle (sdf={d:.6g})")
        if d < params.d0:
            u = u + float(_barrier(d, params)) * (-res.normal)
    for q in np.asarray(neighbor_positions, dtype=float).reshape(-1, 2):
        diff = x - q
        dist = math.hypot(diff[0], diff[1])
        d = dist - 2.0 * robot.radius
        if d < params.d0 and dist > 0:
            u = u + float(_barrier(d, params)) * diff / dist
    return _clamp(u, params.v_max)


def obstacle_sdf_batch(points: np.ndarray, obstacle: ConvexShape):
    """Signed distance and unit gradient of many points to one obstacle."""
    P = np.atleast_2d(points)
    if isinstance(obstacle, Polygon):
        return point_sdf_batch(P, obstacle)
    if isinstance(obstacle, (Disk, Point)):
        c = obstacle.center if isinstance(obstacle, Disk) else obstacle.position
        diff = P - c
        dist = np.linalg.norm(diff, axis=1)
        grad = np.where(dist[:, None] > 0, diff / np.where(dist > 0, dist, 1.0)[:, None],
                        np.array([1.0, 0.0]))
        return dist - obstacle.radius, grad
    raise TypeError(f"unsupported obstacle {type(obstacle).__name__}")


def _controls(X, Xref, obstacles, radius, params):
    """Vectorized APF for all robots.

    Returns ``(u, per-robot min obstacle SDF, min center distance, overlaps)``.
    Only pairs within the barrier cutoff interact, so neighbours come from a
    KD-tree query; pairs are sorted so the force summation order is fixed.
    """
    u = params.w1 * (Xref - X)
    min_sdf = np.full(X.shape[0], np.inf)
    for obs in obstacles:
        sd, grad = obstacle_sdf_batch(X, obs)
        d = sd - radius
        min_sdf = np.minimum(min_sdf, d)
        u += _barrier(d, params)[:, None] * grad
    min_dist, overlaps = math.inf, 0
    if X.shape[0] > 1:
        tree = cKDTree(X)
        pairs = tree.query_pairs(params.d0 + 2.0 * radius, output_type="ndarray")
        if len(pairs):
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            i, j = pairs[:, 0], pairs[:, 1]
            diff = X[i] - X[j]
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            mag = _barrier(dist - 2.0 * radius, params)
            with np.errstate(invalid="ignore", divide="ignore"):
                f = np.where(dist[:, None] > 0, diff / dist[:, None], 0.0) * mag[:, None]
            for ax in range(2):
                u[:, ax] += np.bincount(i, f[:, ax], X.shape[0]) - np.bincount(j, f[:, ax], X.shape[0])
            min_dist = float(dist.min())
            overlaps = int(np.count_nonzero(dist < 2.0 * radius))
        else:
            min_dist = float(tree.query(X, k=2)[0][:, 1].min())
    return _clamp(u, params.v_max), min_sdf, min_dist, overlaps


def simulate(
    initial_positions,
    traj: GmmTrajectory,
    pairs: Sequence[tuple[int, int]],
    obstacles: Sequence[ConvexShape],
    params: MicroParams,
    radius: float = 0.2,
) -> SimulationResult:
    """Euler-integrate every robot over the trajectory horizon.

    Each robot's anchor is re-captured (set to its current position) when
    its pair trajectory enters a new roadmap edge.  Safety violations are
    counted, never raised.
    """
    X = np.array(initial_positions, dtype=float).reshape(-1, 2)
    N = X.shape[0]
    if len(pairs) != N:
        raise ValueError("need one pair per robot")
    if not radius > 0:
        raise ValueError("radius must be positive")
    steps = int(round((traj.tf - traj.t0) / params.dt))
    pair_index = {p.pair: k for k, p in enumerate(traj.pairs)}
    members = {}
    for r, pr in enumerate(pairs):
        members.setdefault(pair_index[tuple(pr)], []).append(r)
    members = {k: np.array(v) for k, v in members.items()}
    maps = [[ot_map(p.nodes[s], p.nodes[s + 1]) for s in range(p.n_segments)] for p in traj.pairs]

    anchor = X.copy()
    segment = np.zeros(N, dtype=int)
    positions = np.empty((steps + 1, N, 2))
    positions[0] = X
    min_sdf_t = np.empty(steps + 1)
    min_dist_t = np.empty(steps + 1)
    robot_min = np.full(N, np.inf)
    collisions = 0
    overlaps = 0
    events: list[str] = []

    def audit(k, sdf_k, md, n_overlap):
        nonlocal collisions, overlaps
        min_sdf_t[k] = sdf_k.min() if sdf_k.size else math.inf
        np.minimum(robot_min, sdf_k, out=robot_min)
        hit = np.flatnonzero(sdf_k < 0)
        collisions += hit.size
        for r in hit[:3]:
            events.append(f"t={traj.t0 + k * params.dt:.4f} robot {r} inside obstacle (sdf={sdf_k[r]:.6g})")
        min_dist_t[k] = md
        overlaps += n_overlap

    Xref = np.empty_like(X)
    for k in range(steps):
        t_next = traj.t0 + (k + 1) * params.dt
        for pk, rows in members.items():
            p = traj.pairs[pk]
            seg, tau = p.segment_at(min(t_next, traj.tf))
            if seg < 0:
                Xref[rows] = anchor[rows]
                continue
            moved = rows[segment[rows] != seg]
            if moved.size:
                anchor[moved] = X[moved]
                segment[moved] = seg
            Xref[rows] = reference_point(p, anchor[rows], seg, tau, maps[pk])
        u, sdf_k, md, n_overlap = _controls(X, Xref, obstacles, radius, params)
        audit(k, sdf_k, md, n_overlap)
        X = X + u * params.dt
        positions[k + 1] = X
    # clearance of the final state
    _, sdf_last, md, n_overlap = _controls(X, X, obstacles, radius, params)
    audit(steps, sdf_last, md, n_overlap)
    return SimulationResult(
        SwarmTrajectories(positions, params.dt, traj.t0),
        [tuple(p) for p in pairs],
        min_sdf_t,
        min_dist_t,
        robot_min,
        collisions,
        overlaps,
        radius,
        events,
    )


def average_traj_length(traj: SwarmTrajectories) -> float:
    """Mean over robots of the summed per-step displacement (m)."""
    P = np.asarray(traj.positions)
    if P.shape[1] < 1:
        raise ValueError("need at least one robot")
    steps = np.linalg.norm(np.diff(P, axis=0), axis=2)
    return float(steps.sum() / P.shape[1])
