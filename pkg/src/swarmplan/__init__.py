"""Risk-aware hierarchical motion planning for robot swarms.

The swarm is modelled as a Gaussian mixture.  A roadmap over Gaussian
distributions, checked against obstacles with a CVaR bound on the signed
distance, yields minimum-Wasserstein routes between mixture components; a
small transport LP splits the mass over those routes, and an artificial
potential field drives each robot along optimal-transport references.
"""
from .gaussian import AffineMap, Gaussian2D, ot_map, w2_distance, w2_geodesic
from .geom2d import Disk, Point, Polygon, SdfResult, signed_distance, support
from .micro import MicroParams, SwarmTrajectories, apf_control, assign_robots, simulate
from .pipeline import PlanBundle, PlanningFailedError, run_plan, run_sim
from .risk import RiskParams, cvar_gaussian, edge_collision_free, in_free, sdf_distribution
from .roadmap import GaussianRoadmap, RoadmapParams, build_roadmap, shortest_path
from .scenario import Scenario, bundled_scenario_path, load_scenario
from .transport import GMM, GmmTrajectory, TransportPlan, gmm_distance, solve_transport_lp

__all__ = [
    "AffineMap", "Gaussian2D", "ot_map", "w2_distance", "w2_geodesic",
    "Disk", "Point", "Polygon", "SdfResult", "signed_distance", "support",
    "MicroParams", "SwarmTrajectories", "apf_control", "assign_robots", "simulate",
    "PlanBundle", "PlanningFailedError", "run_plan", "run_sim",
    "RiskParams", "cvar_gaussian", "edge_collision_free", "in_free", "sdf_distribution",
    "GaussianRoadmap", "RoadmapParams", "build_roadmap", "shortest_path",
    "Scenario", "bundled_scenario_path", "load_scenario",
    "GMM", "GmmTrajectory", "TransportPlan", "gmm_distance", "solve_transport_lp",
]
