"""Plan and simulate the bundled cluttered scenario, then write the outputs.

Run with ``python demos/bundled_scenario.py [output_dir]``.  Equivalent to
``swarmplan run --scenario <bundled> --out <output_dir>``.
"""
import sys
from pathlib import Path

from swarmplan.export import dump_json, render_svg, write_trajectories_csv
from swarmplan.pipeline import run_plan, run_sim
from swarmplan.scenario import bundled_scenario_path, load_scenario

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)

scenario = load_scenario(bundled_scenario_path())
bundle = run_plan(scenario)
g = bundle.roadmap
print(f"roadmap: {len(g.nodes)} nodes, {g.n_edges} edges in {bundle.timing['roadmap_s']:.1f} s")
for (i, j) in bundle.plan.active_pairs():
    route = bundle.plan.routes[(i, j)]
    print(f"  pair {i}->{j}: mass {bundle.plan.lam[i, j]:.4f}, {len(route) - 1} edges, "
          f"W2 length {bundle.plan.costs[i, j]:.1f}")

report = run_sim(scenario, bundle)
m = report.metrics
print(f"robots {m['n_robots']}, steps {m['steps']}")
print(f"min obstacle clearance {m['min_obstacle_sdf']:.3f} m, min robot distance {m['min_robot_distance']:.3f} m")
print(f"average path length {m['average_trajectory_length']:.1f} m "
      f"(lower bound {m['w2_mean_displacement_lower_bound']:.1f} m)")
for row in m["target_groups"]:
    print(f"  target {row['target']}: {row['robots']} robots, mean error {row['mean_error_rel_diag']:.2%}, "
          f"covariance error {row['cov_error_rel_frobenius']:.1%}")

write_trajectories_csv(out / "trajectories.csv", report.result.trajectories)
dump_json(out / "metrics.json", m)
(out / "plot.svg").write_text(render_svg(scenario, g, bundle.trajectory, report.result.trajectories))
print(f"wrote {out}/trajectories.csv, metrics.json, plot.svg")
