"""End-to-end planning and simulation of one scenario."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .gaussian import Gaussian2D
from .micro import (
    SimulationResult,
    assign_robots,
    average_traj_length,
    largest_remainder,
    obstacle_sdf_batch,
    simulate,
)
from .roadmap import (
    GaussianRoadmap,
    SamplingExhaustedError,
    SeedUnsafeError,
    _trace,
    build_roadmap,
    dijkstra,
)
from .scenario import Scenario
from .transport import (
    GMM,
    GmmTrajectory,
    InfeasibleTransportError,
    TransportPlan,
    assemble_trajectory,
    density_at,
    gmm_distance,
    transport_simplex,
)

__all__ = [
    "PlanningFailedError",
    "PlanBundle",
    "SimReport",
    "run_plan",
    "run_sim",
    "sample_initial_positions",
    "rng_streams",
    "peak_density",
]


class PlanningFailedError(RuntimeError):
    def __init__(self, message: str, disconnected: list[tuple[int, int]] | None = None):
        self.disconnected = disconnected or []
        super().__init__(message)


@dataclass
class PlanBundle:
    roadmap: GaussianRoadmap
    plan: TransportPlan
    trajectory: GmmTrajectory
    src_nodes: list[int]
    dst_nodes: list[int]
    timing: dict[str, float] = field(default_factory=dict)


@dataclass
class SimReport:
    result: SimulationResult
    initial_positions: np.ndarray
    components: np.ndarray | None
    metrics: dict


def rng_streams(seed: int):
    """Independent generators for planning and for robot sampling."""
    plan_ss, sim_ss = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(plan_ss), np.random.default_rng(sim_ss)


def run_plan(scenario: Scenario, seed: int | None = None, workers: int = 1) -> PlanBundle:
    """Roadmap, all-pairs routes, transport LP and GMM trajectory.

    Raises
    ------
    PlanningFailedError
        Seeds unsafe, sampling exhausted, or mass forced onto unreachable pairs.
    """
    seed = scenario.seed if seed is None else seed
    rng, _ = rng_streams(seed)
    init, target = scenario.initial_gmm, scenario.target_gmm
    timing = {}

    t = time.perf_counter()
    try:
        graph = build_roadmap(scenario.roadmap, scenario.obstacles, scenario.risk,
                              list(init.components) + list(target.components), rng, workers)
    except (SeedUnsafeError, SamplingExhaustedError) as exc:
        raise PlanningFailedError(str(exc)) from exc
    timing["roadmap_s"] = time.perf_counter() - t

    t = time.perf_counter()
    src = [graph.index_of(g) for g in init.components]
    dst = [graph.index_of(g) for g in target.components]
    costs = np.full((len(src), len(dst)), np.inf)
    routes: dict[tuple[int, int], list[int]] = {}
    for i, s in enumerate(src):
        dist, pred = dijkstra(graph, s)
        for j, d in enumerate(dst):
            if np.isfinite(dist[d]):
                costs[i, j] = dist[d]
                routes[(i, j)] = _trace(pred, s, d)
    timing["shortest_paths_s"] = time.perf_counter() - t

    t = time.perf_counter()
    try:
        res = transport_simplex(costs, init.weights, target.weights, scenario.density_cap)
    except InfeasibleTransportError as exc:
        missing = [(int(i), int(j)) for i, j in zip(*np.nonzero(~np.isfinite(costs)))]
        raise PlanningFailedError(
            f"transport infeasible ({exc}); disconnected pairs: {missing}", missing
        ) from exc
    timing["lp_s"] = time.perf_counter() - t

    t = time.perf_counter()
    plan = TransportPlan(res.lam, costs, routes)
    traj = assemble_trajectory(plan, graph, scenario.horizon)
    timing["assemble_s"] = time.perf_counter() - t
    timing["total_s"] = sum(timing.values())
    return PlanBundle(graph, plan, traj, src, dst, timing)


def sample_initial_positions(scenario: Scenario, rng: np.random.Generator, max_rounds: int = 1000):
    """Draw robot positions from the initial mixture.

    Each component receives a largest-remainder share of the robots.  The
    standard-normal draws of a component are whitened to zero mean and unit
    covariance before scaling, so every group starts with its component's
    first two moments.  Robots that leave the workspace, touch an obstacle
    or overlap another robot are then jittered locally (redrawn from the
    component after repeated failures), which disturbs the moments only
    slightly.

    Returns
    -------
    positions : ndarray, shape (N, 2)
    components : ndarray, shape (N,)
        Index of the component each robot was drawn from.
    """
    gmm = scenario.initial_gmm
    counts = largest_remainder(scenario.n_robots, gmm.weights)
    r = scenario.robot_radius
    placed = np.empty((0, 2))
    labels: list[int] = []
    for i, (g, n_i) in enumerate(zip(gmm.components, counts)):
        if n_i == 0:
            continue
        L = np.linalg.cholesky(g.cov)
        Z = rng.standard_normal((n_i, 2))
        if n_i >= 3:
            Z = Z - Z.mean(axis=0)
            Lz = np.linalg.cholesky(Z.T @ Z / n_i)
            Z = np.linalg.solve(Lz, Z.T).T
        X = g.mean + Z @ L.T
        fails = np.zeros(n_i, dtype=int)
        for _ in range(max_rounds):
            bad = _bad_positions(X, placed, scenario, r)
            if bad.size == 0:
                break
            for k in bad:
                fails[k] += 1
                if fails[k] % 10 == 0:
                    X[k] = g.mean + L @ rng.standard_normal(2)
                else:
                    X[k] = X[k] + rng.normal(0.0, 2.0 * r, size=2)
        else:
            raise PlanningFailedError(f"could not place robots of initial component {i}")
        placed = np.vstack([placed, X])
        labels += [i] * n_i
    return placed, np.array(labels)


def _bad_positions(X, placed, scenario: Scenario, r: float) -> np.ndarray:
    """Indices of rows of ``X`` that leave the workspace, touch an obstacle or overlap."""
    bad = (X[:, 0] < r) | (X[:, 1] < r) | (X[:, 0] > scenario.width - r) | (X[:, 1] > scenario.height - r)
    for obs in scenario.obstacles:
        sd, _ = obstacle_sdf_batch(X, obs)
        bad |= sd - r <= 0
    allp = np.vstack([placed, X])
    diff = X[:, None, :] - allp[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    # a robot only yields to robots placed before it
    k = np.arange(X.shape[0])[:, None] + placed.shape[0]
    earlier = np.arange(allp.shape[0])[None, :] < k
    bad |= np.any((dist <= 2 * r) & earlier, axis=1)
    return np.flatnonzero(bad)


def _group_fit(final: np.ndarray, pairs, n_targets: int):
    groups = []
    for j in range(n_targets):
        rows = [k for k, p in enumerate(pairs) if p[1] == j]
        P = final[rows]
        mean = P.mean(axis=0)
        cov = (P - mean).T @ (P - mean) / len(rows) if len(rows) > 1 else np.zeros((2, 2))
        groups.append((len(rows), mean, cov + 1e-9 * np.eye(2)))
    return groups


def peak_density(traj: GmmTrajectory, width: float, height: float,
                 n_times: int = 20, grid: tuple[int, int] = (100, 80)) -> float:
    """Largest mixture density over a cell-centre grid at evenly spaced times (1/m^2)."""
    xs = (np.arange(grid[0]) + 0.5) * width / grid[0]
    ys = (np.arange(grid[1]) + 0.5) * height / grid[1]
    pts = np.stack(np.meshgrid(xs, ys), axis=-1)
    return max(float(density_at(traj, float(t), pts).max())
               for t in np.linspace(traj.t0, traj.tf, n_times))


def _finite(x: float):
    return float(x) if math.isfinite(x) else None


def run_sim(scenario: Scenario, bundle: PlanBundle, seed: int | None = None) -> SimReport:
    """Microscopic stage plus the metrics report."""
    seed = scenario.seed if seed is None else seed
    _, rng = rng_streams(seed)
    if scenario.initial_positions is not None:
        X0 = np.asarray(scenario.initial_positions, dtype=float)
        labels = None
    else:
        X0, labels = sample_initial_positions(scenario, rng)
    pairs = assign_robots(X0, scenario.initial_gmm, bundle.plan, labels)
    res = simulate(X0, bundle.trajectory, pairs, scenario.obstacles, scenario.micro,
                   scenario.robot_radius)

    final = res.trajectories.positions[-1]
    target = scenario.target_gmm
    diag = math.hypot(scenario.width, scenario.height)
    groups = _group_fit(final, pairs, len(target))
    comps, weights, group_rows = [], [], []
    for j, (count, mean, cov) in enumerate(groups):
        tg = target.components[j]
        group_rows.append({
            "target": j,
            "robots": count,
            "mean_error_rel_diag": _finite(np.linalg.norm(mean - tg.mean) / diag) if count else None,
            "cov_error_rel_frobenius": _finite(np.linalg.norm(cov - tg.cov) / np.linalg.norm(tg.cov))
            if count > 1 else None,
        })
        if count:
            comps.append(Gaussian2D(mean, cov))
            weights.append(count / len(pairs))
    fit = GMM(tuple(comps), np.array(weights))
    final_dist, _ = gmm_distance(fit, target)

    lam = bundle.plan.lam
    lower = sum(
        lam[i, j] * float(np.linalg.norm(target.components[j].mean - scenario.initial_gmm.components[i].mean))
        for i, j in bundle.plan.active_pairs()
    )
    ok_steps = res.min_robot_distance >= 2 * scenario.robot_radius
    metrics = {
        "n_robots": len(pairs),
        "steps": int(res.trajectories.positions.shape[0] - 1),
        "dt": scenario.micro.dt,
        "average_trajectory_length": average_traj_length(res.trajectories),
        "w2_mean_displacement_lower_bound": lower,
        "min_obstacle_sdf": _finite(float(res.robot_min_sdf.min())),
        "min_robot_distance": _finite(float(res.min_robot_distance.min())),
        "fraction_steps_separated": float(ok_steps.mean()),
        "obstacle_collisions": int(res.obstacle_collisions),
        "robot_overlaps": int(res.robot_overlaps),
        "final_gmm_distance": final_dist,
        "target_groups": group_rows,
        "transport_cost": float(np.sum(np.where(lam > 0, lam * np.nan_to_num(bundle.plan.costs, posinf=0.0), 0.0))),
        "lambda": [[float(v) for v in row] for row in lam],
    }
    if scenario.density_cap is not None:
        # soft audit: the cap bounds per-pair mass, not pointwise density
        metrics["peak_density"] = peak_density(bundle.trajectory, scenario.width, scenario.height)
    return SimReport(res, X0, labels, metrics)
