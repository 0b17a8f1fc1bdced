"""How the risk level changes the roadmap and the plan on the bundled scenario.

A smaller alpha averages over a thinner tail of the SDF distribution, so
fewer Gaussians count as free and routes keep a wider berth.  The node
count is fixed, so at small alpha the roadmap packs into the remaining free
space and gains edges while the transport cost grows with the detours.  The
sweep rebuilds the roadmap at each level with the same seed.

Run with ``python demos/risk_sweep.py``.
"""
import dataclasses

from swarmplan.pipeline import PlanningFailedError, run_plan
from swarmplan.risk import RiskParams
from swarmplan.scenario import bundled_scenario_path, load_scenario

base = load_scenario(bundled_scenario_path())
print(f"{'alpha':>6} {'edges':>6} {'cost':>8} {'time':>6}")
for alpha in (0.01, 0.05, 0.2, 0.5):
    scenario = dataclasses.replace(base, risk=RiskParams(alpha, base.risk.delta))
    try:
        bundle = run_plan(scenario)
    except PlanningFailedError as exc:
        print(f"{alpha:>6} planning failed: {exc}")
        continue
    lam, costs = bundle.plan.lam, bundle.plan.costs
    cost = sum(lam[i, j] * costs[i, j] for i, j in bundle.plan.active_pairs())
    print(f"{alpha:>6} {bundle.roadmap.n_edges:>6} {cost:>8.2f} {bundle.timing['total_s']:>5.1f}s")
