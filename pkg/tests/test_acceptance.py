"""Acceptance suite: one recorded PASS/FAIL line per criterion.

Each test checks a criterion at its stated tolerance against an independent
reference (numerical integration, brute force enumeration, Monte-Carlo or a
recomputation from stored outputs).  The lines are repeated in the pytest
terminal summary.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import (
    brute_force_shortest,
    cvar_by_integration,
    empirical_w2,
    lp_by_vertex_enumeration,
    random_polygon,
    random_spd,
)
from swarmplan.gaussian import Gaussian2D, w2_distance, w2_geodesic
from swarmplan.geom2d import Polygon, point_sdf_batch
from swarmplan.micro import obstacle_sdf_batch
from swarmplan.pipeline import run_plan, run_sim
from swarmplan.risk import RiskParams, ScalarGaussian, cvar_gaussian, in_free, sdf_distribution
from swarmplan.roadmap import GaussianRoadmap, shortest_path
from swarmplan.scenario import bundled_scenario_path, load_scenario
from swarmplan.transport import solve_transport_lp


def random_gaussian(rng, spread=20.0):
    return Gaussian2D(rng.uniform(-spread, spread, 2), random_spd(rng, max_cond=1e3))


def test_cvar_closed_form(criterion):
    rng = np.random.default_rng(101)
    cases = [(rng.uniform(-10, 10), rng.uniform(0.01, 10)) for _ in range(50)]
    alphas = [0.01, 0.05, 0.1, 0.5, 0.9, 1.0]
    t = time.perf_counter()
    got = [cvar_gaussian(ScalarGaussian(mu, s), a) for a in alphas for mu, s in cases]
    elapsed = time.perf_counter() - t
    want = [cvar_by_integration(mu, s, a) for a in alphas for mu, s in cases]
    err = float(np.max(np.abs(np.subtract(got, want))))
    ok = criterion("CVaR closed form", err <= 1e-6 and elapsed < 1.0,
                   f"max |err| {err:.2e} (<= 1e-6) over 300 cases, {elapsed * 1e3:.1f} ms (< 1 s)")
    assert ok


def test_wasserstein_geometry(criterion):
    rng = np.random.default_rng(102)
    t = time.perf_counter()
    gs = [random_gaussian(rng) for _ in range(1500)]
    symmetric, slack, endpoint, speed = True, -np.inf, 0.0, 0.0
    for k in range(500):
        a, b, c = gs[3 * k], gs[3 * k + 1], gs[3 * k + 2]
        ab = w2_distance(a, b)
        symmetric &= ab == w2_distance(b, a) and ab >= 0
        slack = max(slack, w2_distance(a, c) - ab - w2_distance(b, c))
        g0, g1 = w2_geodesic(a, b, 0.0), w2_geodesic(a, b, 1.0)
        endpoint = max(endpoint, np.abs(g0.mean - a.mean).max(), np.abs(g0.cov - a.cov).max(),
                       np.abs(g1.mean - b.mean).max(), np.abs(g1.cov - b.cov).max() / max(1.0, np.abs(b.cov).max()))
        s, u = sorted(rng.uniform(0, 1, 2))
        speed = max(speed, abs(w2_distance(w2_geodesic(a, b, s), w2_geodesic(a, b, u)) - (u - s) * ab))
    mc = 0.0
    for _ in range(10):
        a = Gaussian2D(rng.uniform(-2, 2, 2), random_spd(rng, 10))
        b = Gaussian2D(a.mean + rng.uniform(3, 5, 2), random_spd(rng, 10))
        x, y = a.sample(rng, 1000), b.sample(rng, 1000)
        mc = max(mc, abs(empirical_w2(x, y) / w2_distance(a, b) - 1))
    elapsed = time.perf_counter() - t
    ok = symmetric and slack <= 1e-9 and endpoint <= 1e-9 and speed <= 1e-6 and mc <= 0.05 and elapsed < 30
    detail = (f"symmetry {'exact' if symmetric else 'broken'}, triangle excess {slack:.1e} (<= 1e-9), "
              f"endpoint {endpoint:.1e} (<= 1e-9), speed {speed:.1e} (<= 1e-6), "
              f"Monte-Carlo {mc:.1%} (<= 5%), {elapsed:.1f} s (< 30 s)")
    assert criterion("Wasserstein geometry", ok, detail)


def test_sdf_linearization(criterion):
    rng = np.random.default_rng(103)
    n = 100_000
    t = time.perf_counter()
    half_plane = Polygon.box(0, -1e4, 1e4, 1e4)  # the far edges are out of reach
    worst_z = 0.0
    for _ in range(5):
        g = Gaussian2D([rng.uniform(-6, 1), rng.uniform(-5, 5)], random_spd(rng, max_cond=20))
        eta = sdf_distribution(g, half_plane)
        s = -point_sdf_batch(g.sample(rng, n), half_plane)[0]
        z_mean = abs(s.mean() - eta.mean) / (eta.std / math.sqrt(n))
        z_var = abs(s.var(ddof=1) - eta.std**2) / (eta.std**2 * math.sqrt(2 / (n - 1)))
        worst_z = max(worst_z, z_mean, z_var)

    # random convex polygons, mean placed at a standoff of 2 to 4 largest stds
    worst_mean = worst_var = 0.0
    for _ in range(20):
        poly = random_polygon(rng, scale=10.0)
        cov = random_spd(rng, max_cond=10)
        sd_max = math.sqrt(np.linalg.eigvalsh(cov).max())
        standoff = rng.uniform(2, 4) * sd_max
        u = np.array([math.cos(th := rng.uniform(0, 2 * math.pi)), math.sin(th)])
        c = poly.vertices.mean(axis=0)
        lo, hi = 0.0, 1e3
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if point_sdf_batch((c + mid * u)[None], poly)[0][0] < standoff else (lo, mid)
        g = Gaussian2D(c + hi * u, cov)
        eta = sdf_distribution(g, poly)
        s = -point_sdf_batch(g.sample(rng, n), poly)[0]
        worst_mean = max(worst_mean, abs(s.mean() - eta.mean) / abs(eta.mean))
        worst_var = max(worst_var, abs(s.var(ddof=1) - eta.std**2) / eta.std**2)
    elapsed = time.perf_counter() - t
    ok = worst_z <= 4 and worst_mean <= 0.05 and worst_var <= 0.05 and elapsed < 30
    detail = (f"half-plane worst {worst_z:.2f} standard errors (<= 4); polygons worst relative "
              f"mean {worst_mean:.1%}, variance {worst_var:.1%} (<= 5%); {elapsed:.1f} s (< 30 s)")
    assert criterion("SDF linearization", ok, detail)


def test_lp_transport(criterion):
    rng = np.random.default_rng(104)
    instances = []
    for k in range(200):
        m, n = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        if k % 4 == 0:  # integer grid: ties and degenerate vertices
            costs = rng.integers(0, 4, (m, n)).astype(float)
            w0 = rng.integers(1, 4, m).astype(float)
            wf = rng.integers(1, 4, n).astype(float)
            w0, wf = w0 / w0.sum(), wf / wf.sum()
        else:
            costs = rng.uniform(0, 100, (m, n))
            w0, wf = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(n))
        instances.append((costs, w0, wf))
    t = time.perf_counter()
    sols = [solve_transport_lp(*inst) for inst in instances]
    elapsed = time.perf_counter() - t
    obj_err = marg_err = 0.0
    for (costs, w0, wf), lam in zip(instances, sols):
        best, _ = lp_by_vertex_enumeration(costs, w0, wf)
        obj_err = max(obj_err, abs(float(np.sum(lam * costs)) - best) / max(1.0, abs(best)))
        marg_err = max(marg_err, np.abs(lam.sum(1) - w0).max(), np.abs(lam.sum(0) - wf).max(), -lam.min())
    ok = obj_err <= 1e-12 and marg_err <= 1e-9 and elapsed < 10
    detail = (f"objective rel. err {obj_err:.1e} (<= 1e-12), marginals {marg_err:.1e} (<= 1e-9), "
              f"{elapsed:.2f} s (< 10 s) over 200 instances")
    assert criterion("LP transport", ok, detail)


def test_graph_search(criterion):
    rng = np.random.default_rng(105)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(2, 11))
        g = GaussianRoadmap([Gaussian2D([k, 0], np.eye(2)) for k in range(n)])
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.4:
                    g.add_edge(i, j, float(rng.uniform(0.1, 10)))
        src, dst = (int(v) for v in rng.choice(n, 2, replace=False))
        cost, path = brute_force_shortest(g.adjacency, src, dst)
        got = shortest_path(g, src, dst)
        mismatches += (got is not None) if path is None else got != (path, cost)
    assert criterion("Graph search", mismatches == 0, f"{mismatches} mismatches on 100 random graphs (exact)")


@pytest.fixture(scope="module")
def bundled_run():
    scenario = load_scenario(bundled_scenario_path())
    t = time.perf_counter()
    bundle = run_plan(scenario)
    plan_s = time.perf_counter() - t
    return scenario, bundle, plan_s, run_sim(scenario, bundle)


def test_end_to_end(criterion, bundled_run):
    scenario, bundle, plan_s, report = bundled_run
    m = report.metrics
    P = report.result.trajectories.positions
    r = scenario.robot_radius
    # recompute the obstacle clearance of every robot from the stored positions
    sdf = np.full(P.shape[:2], np.inf)
    for obs in scenario.obstacles:
        sdf = np.minimum(sdf, obstacle_sdf_batch(P.reshape(-1, 2), obs)[0].reshape(P.shape[:2]) - r)
    min_sdf = float(sdf.min())
    mean_err = max(g["mean_error_rel_diag"] for g in m["target_groups"])
    cov_err = max(g["cov_error_rel_frobenius"] for g in m["target_groups"])
    d_bar, lower = m["average_trajectory_length"], m["w2_mean_displacement_lower_bound"]
    ok = (plan_s < 60 and min_sdf >= 0 and m["fraction_steps_separated"] >= 0.99
          and m["robot_overlaps"] == 0 and m["obstacle_collisions"] == 0
          and mean_err < 0.10 and cov_err < 0.25 and math.isfinite(d_bar) and d_bar >= lower)
    detail = (f"N={m['n_robots']}, planning {plan_s:.1f} s (< 60 s), min SDF {min_sdf:.3f} m (>= 0), "
              f"separated steps {m['fraction_steps_separated']:.2%} (>= 99%), overlaps {m['robot_overlaps']}, "
              f"mean err {mean_err:.2%} (< 10%), cov err {cov_err:.1%} (< 25%), "
              f"D_bar {d_bar:.1f} m >= bound {lower:.1f} m")
    assert criterion("End-to-end bundled scenario", ok, detail)


def test_risk_monotonicity(criterion, bundled_run):
    scenario = bundled_run[0]
    rng = np.random.default_rng(106)
    corpus = []
    while len(corpus) < 1000:
        obs = scenario.obstacles[int(rng.integers(len(scenario.obstacles)))]
        c, R = obs.bounding_circle()
        th = rng.uniform(0, 2 * math.pi)
        mean = c + (R + rng.uniform(-5, 20)) * np.array([math.cos(th), math.sin(th)])
        s1, s2 = rng.uniform(1, 8, 2)
        rho = rng.uniform(-0.8, 0.8)
        corpus.append(Gaussian2D(mean, [[s1 * s1, rho * s1 * s2], [rho * s1 * s2, s2 * s2]]))
    alphas = [0.01, 0.05, 0.1, 0.2]
    accepted = {a: {k for k, g in enumerate(corpus) if in_free(g, scenario.obstacles, RiskParams(a, -1.0))}
                for a in alphas}
    counts = [len(accepted[a]) for a in alphas]
    subset = accepted[0.01] <= accepted[0.2]
    ok = subset and all(x <= y for x, y in zip(counts, counts[1:]))
    detail = f"accepted counts {counts} for alpha {alphas}, alpha=0.01 set within alpha=0.2 set: {subset}"
    assert criterion("Risk-tolerance monotonicity", ok, detail)


def test_determinism(criterion, tmp_path):
    scenario = str(bundled_scenario_path())
    outs = []
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        proc = subprocess.run([sys.executable, "-m", "swarmplan", "run", "--scenario", scenario,
                               "--out", str(out), "--threads", str(threads)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    same = {name: (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
            for name in ("trajectories.csv", "metrics.json")}
    detail = ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items())
    assert criterion("Determinism (--threads 1 vs 4)", all(same.values()), detail)
