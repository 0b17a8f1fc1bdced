"""File outputs: trajectories CSV, JSON reports and an SVG overview."""
from __future__ import annotations

import io
import json
import math
from pathlib import Path

import numpy as np

from .geom2d import Disk, Point, Polygon
from .micro import SwarmTrajectories
from .roadmap import GaussianRoadmap
from .transport import GmmTrajectory, TransportPlan

__all__ = [
    "write_trajectories_csv",
    "read_trajectories_csv",
    "dump_json",
    "plan_to_dict",
    "plan_from_dict",
    "render_svg",
]

CSV_HEADER = "t,robot_id,x,y"


def _clean(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=1, sort_keys=True) + "\n")


def write_trajectories_csv(path, traj: SwarmTrajectories) -> None:
    """One row per robot per step, six decimals, robot rows grouped by time."""
    P = traj.positions
    steps, N = P.shape[0], P.shape[1]
    t = np.repeat(traj.times, N)
    ids = np.tile(np.arange(N), steps)
    table = np.column_stack([t, ids, P.reshape(-1, 2)])
    buf = io.StringIO()
    np.savetxt(buf, table, fmt=["%.6f", "%d", "%.6f", "%.6f"], delimiter=",",
               header=CSV_HEADER, comments="")
    Path(path).write_text(buf.getvalue())


def read_trajectories_csv(path) -> SwarmTrajectories:
    """Inverse of :func:`write_trajectories_csv` (positions rounded to 1e-6)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        body = fh.read()
    if not body.strip():
        return SwarmTrajectories(np.zeros((0, 0, 2)), 0.0)
    data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    N = int(data[:, 1].max()) + 1
    steps = data.shape[0] // N
    times = data[::N, 0]
    dt = float(times[1] - times[0]) if steps > 1 else 0.0
    return SwarmTrajectories(data[:, 2:].reshape(steps, N, 2), dt, float(times[0]))


def plan_to_dict(plan: TransportPlan, traj: GmmTrajectory) -> dict:
    return {
        "lambda": plan.lam,
        "costs": plan.costs,
        "routes": [[i, j, route] for (i, j), route in sorted(plan.routes.items())],
        "trajectory": traj.to_dict(),
    }


def plan_from_dict(data: dict, graph: GaussianRoadmap):
    costs = np.array([[np.inf if c is None else c for c in row] for row in data["costs"]], dtype=float)
    routes = {(int(i), int(j)): [int(k) for k in route] for i, j, route in data["routes"]}
    plan = TransportPlan(np.array(data["lambda"], dtype=float), costs, routes)
    return plan, GmmTrajectory.from_dict(data["trajectory"], graph)


# -- SVG -----------------------------------------------------------------------

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"]


def _f(v: float) -> str:
    return f"{v:.2f}"


def render_svg(scenario, graph=None, traj: GmmTrajectory | None = None,
               robots: SwarmTrajectories | None = None, n_times: int = 6,
               scale: float = 4.0, path_stride: int = 25) -> str:
    """Deterministic SVG of workspace, obstacles, roadmap, 1-sigma ellipses and robot paths."""
    W, H = scenario.width * scale, scenario.height * scale

    def xy(p):
        return p[0] * scale, (scenario.height - p[1]) * scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(W)}" height="{_f(H)}" '
        f'viewBox="0 0 {_f(W)} {_f(H)}">',
        f'<rect id="workspace" x="0" y="0" width="{_f(W)}" height="{_f(H)}" fill="white" stroke="black"/>',
        '<g id="obstacles" fill="#555555" stroke="none">',
    ]
    for shape in scenario.obstacles:
        if isinstance(shape, Polygon):
            pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in map(xy, shape.vertices))
            out.append(f'<polygon points="{pts}"/>')
        elif isinstance(shape, (Disk, Point)):
            c = shape.center if isinstance(shape, Disk) else shape.position
            rad = shape.radius * scale if isinstance(shape, Disk) else 1.0
            cx, cy = xy(c)
            out.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(rad)}"/>')
    out.append("</g>")

    if graph is not None:
        out.append('<g id="roadmap" stroke="#cccccc" stroke-width="0.5" fill="#aaaaaa">')
        for i, j, _ in graph.edges():
            (x1, y1), (x2, y2) = xy(graph.nodes[i].mean), xy(graph.nodes[j].mean)
            out.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}"/>')
        for node in graph.nodes:
            cx, cy = xy(node.mean)
            out.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="1"/>')
        out.append("</g>")

    if traj is not None and traj.pairs:
        out.append('<g id="components" fill="none" stroke-width="1.2">')
        for t in np.linspace(traj.t0, traj.tf, n_times):
            for k, p in enumerate(traj.pairs):
                g = p.at(float(t))
                vals, vecs = np.linalg.eigh(g.cov)
                angle = -math.degrees(math.atan2(vecs[1, 1], vecs[0, 1]))
                cx, cy = xy(g.mean)
                out.append(
                    f'<ellipse cx="{_f(cx)}" cy="{_f(cy)}" rx="{_f(math.sqrt(vals[1]) * scale)}" '
                    f'ry="{_f(math.sqrt(vals[0]) * scale)}" transform="rotate({_f(angle)} {_f(cx)} {_f(cy)})" '
                    f'stroke="{_PALETTE[k % len(_PALETTE)]}"/>'
                )
        out.append("</g>")

    if robots is not None and robots.positions.size:
        out.append('<g id="robots" fill="none" stroke="#000000" stroke-width="0.4" stroke-opacity="0.5">')
        P = robots.positions
        idx = list(range(0, P.shape[0], path_stride))
        if idx[-1] != P.shape[0] - 1:
            idx.append(P.shape[0] - 1)
        for r in range(P.shape[1]):
            pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in map(xy, P[idx, r]))
            out.append(f'<polyline points="{pts}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
