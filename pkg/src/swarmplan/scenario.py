"""Scenario files: YAML documents describing workspace, swarm and settings."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .gaussian import Gaussian2D
from .geom2d import ConvexShape, Disk, Point, Polygon
from .micro import MicroParams
from .risk import RiskParams
from .roadmap import RoadmapParams
from .transport import GMM

__all__ = [
    "ScenarioError",
    "ScenarioParseError",
    "ScenarioValidationError",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "bundled_scenario_path",
]


class ScenarioError(ValueError):
    pass


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class Scenario:
    width: float
    height: float
    obstacles: list[ConvexShape]
    obstacle_groups: list[str]
    initial_gmm: GMM
    target_gmm: GMM
    n_robots: int
    robot_radius: float
    horizon: tuple[float, float]
    risk: RiskParams
    roadmap: RoadmapParams
    micro: MicroParams
    seed: int = 0
    density_cap: float | None = None
    initial_positions: np.ndarray | None = None
    name: str = "scenario"
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def sample_positions(self) -> bool:
        return self.initial_positions is None


def bundled_scenario_path(name: str = "cluttered_200x160") -> Path:
    return Path(__file__).parent / "scenarios" / f"{name}.yaml"


def _num(value, path: str) -> float:
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ScenarioValidationError(path, f"not a number: {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(path, f"not a number: {value!r}")
    return float(value)


def _vec(value, n: int, path: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ScenarioValidationError(path, f"expected a list of {n} numbers")
    return [_num(v, f"{path}[{k}]") for k, v in enumerate(value)]


def _section(doc: dict, key: str, path: str = "") -> dict:
    sec = doc.get(key, {}) or {}
    if not isinstance(sec, dict):
        raise ScenarioValidationError(path + key, "expected a mapping")
    return sec


def _gmm(items, path: str) -> GMM:
    if not isinstance(items, list) or not items:
        raise ScenarioValidationError(path, "expected a non-empty list of components")
    comps, weights = [], []
    for k, item in enumerate(items):
        p = f"{path}[{k}]"
        if not isinstance(item, dict):
            raise ScenarioValidationError(p, "expected a mapping")
        for key in ("weight", "mean", "cov"):
            if key not in item:
                raise ScenarioParseError(f"{p}: missing '{key}'")
        weights.append(_num(item["weight"], p + ".weight"))
        mean = _vec(item["mean"], 2, p + ".mean")
        cov = item["cov"]
        if isinstance(cov, (int, float, str)):
            c = _num(cov, p + ".cov")
            cov = [[c, 0.0], [0.0, c]]
        elif not (isinstance(cov, list) and len(cov) == 2):
            raise ScenarioValidationError(p + ".cov", "expected a 2x2 matrix or a scalar")
        rows = [_vec(cov[r], 2, f"{p}.cov[{r}]") for r in range(2)]
        try:
            comps.append(Gaussian2D(mean, rows))
        except ValueError as exc:
            raise ScenarioValidationError(p, str(exc)) from None
    try:
        return GMM(tuple(comps), np.array(weights))
    except ValueError as exc:
        raise ScenarioValidationError(path, str(exc)) from None


def _obstacle(item, path: str) -> ConvexShape:
    if not isinstance(item, dict):
        raise ScenarioParseError(f"{path}: expected a mapping")
    kind = item.get("type", "polygon")
    try:
        if kind == "polygon":
            if "vertices" not in item:
                raise ScenarioParseError(f"{path}: polygon without a 'vertices' list")
            verts = item["vertices"]
            if not isinstance(verts, list):
                raise ScenarioParseError(f"{path}.vertices: expected a list")
            return Polygon([_vec(v, 2, f"{path}.vertices[{k}]") for k, v in enumerate(verts)])
        if kind == "box":
            lo = _vec(item["min"], 2, path + ".min")
            hi = _vec(item["max"], 2, path + ".max")
            return Polygon.box(lo[0], lo[1], hi[0], hi[1])
        if kind == "disk":
            return Disk(_vec(item["center"], 2, path + ".center"), _num(item["radius"], path + ".radius"))
        if kind == "point":
            return Point(_vec(item["position"], 2, path + ".position"))
    except KeyError as exc:
        raise ScenarioParseError(f"{path}: missing {exc}") from None
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioValidationError(path, str(exc)) from None
    raise ScenarioValidationError(path + ".type", f"unknown obstacle type {kind!r}")


def _pair(value, path):
    v = _vec(value, 2, path)
    return (v[0], v[1])


def parse_scenario(doc: Any, name: str = "scenario") -> Scenario:
    """Validate a decoded scenario document."""
    if not isinstance(doc, dict):
        raise ScenarioParseError("top level must be a mapping")
    ws = _section(doc, "workspace")
    width = _num(ws.get("width", 200.0), "workspace.width")
    height = _num(ws.get("height", 160.0), "workspace.height")
    if not (width > 0 and height > 0):
        raise ScenarioValidationError("workspace", "width and height must be positive")

    obstacles, groups = [], []
    raw_obs = doc.get("obstacles", []) or []
    if not isinstance(raw_obs, list):
        raise ScenarioParseError("obstacles: expected a list")
    for k, item in enumerate(raw_obs):
        shape = _obstacle(item, f"obstacles[{k}]")
        c, R = shape.bounding_circle()
        lo, hi = _extent(shape)
        if lo[0] < 0 or lo[1] < 0 or hi[0] > width or hi[1] > height:
            raise ScenarioValidationError(f"obstacles[{k}]", "obstacle leaves the workspace")
        obstacles.append(shape)
        groups.append(str(item.get("group", f"obstacle{k}")))

    for key in ("initial_gmm", "target_gmm"):
        if key not in doc:
            raise ScenarioParseError(f"missing '{key}'")
    initial = _gmm(doc["initial_gmm"], "initial_gmm")
    target = _gmm(doc["target_gmm"], "target_gmm")

    robots = _section(doc, "robots")
    positions = None
    if "positions" in robots:
        raw = robots["positions"]
        if not isinstance(raw, list) or not raw:
            raise ScenarioValidationError("robots.positions", "expected a non-empty list")
        positions = np.array([_vec(p, 2, f"robots.positions[{k}]") for k, p in enumerate(raw)])
        n_robots = len(positions)
    else:
        if not robots.get("sample_from_initial_gmm", True):
            raise ScenarioValidationError("robots", "give positions or sample_from_initial_gmm: true")
        n_robots = robots.get("count", 100)
        if isinstance(n_robots, bool) or not isinstance(n_robots, int) or n_robots < 1:
            raise ScenarioValidationError("robots.count", "must be an integer >= 1")
    radius = _num(robots.get("radius", 0.2), "robots.radius")
    if not radius > 0:
        raise ScenarioValidationError("robots.radius", "must be positive")

    horizon = _pair(doc.get("horizon", [0.0, 120.0]), "horizon")
    if not horizon[1] > horizon[0]:
        raise ScenarioValidationError("horizon", "need T_f > T_0")

    risk_doc = _section(doc, "risk")
    try:
        risk = RiskParams(
            alpha=_num(risk_doc.get("alpha", 0.05), "risk.alpha"),
            delta=_num(risk_doc.get("delta", -1.0), "risk.delta"),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioValidationError("risk", str(exc)) from None

    rm = _section(doc, "roadmap")
    try:
        roadmap = RoadmapParams(
            n=int(rm.get("n", 500)),
            r=_num(rm.get("r", 20.0), "roadmap.r"),
            resolution=int(rm.get("resolution", 10)),
            sampler_mix=_num(rm.get("sampler_mix", 0.3), "roadmap.sampler_mix"),
            bounds=(0.0, 0.0, width, height),
            sigma1_range=_pair(rm.get("sigma1_range", [2.0, 15.0]), "roadmap.sigma1_range"),
            sigma2_range=_pair(rm.get("sigma2_range", [2.0, 15.0]), "roadmap.sigma2_range"),
            rho_range=_pair(rm.get("rho_range", [-0.8, 0.8]), "roadmap.rho_range"),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioValidationError("roadmap", str(exc)) from None

    mc = _section(doc, "micro")
    defaults = MicroParams()
    try:
        micro = MicroParams(**{
            key: _num(mc.get(key, getattr(defaults, key)), f"micro.{key}")
            for key in ("w1", "w2", "d0", "k_rep", "v_max", "dt")
        })
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioValidationError("micro", str(exc)) from None

    cap = doc.get("density_cap")
    if cap is not None:
        cap = _num(cap, "density_cap")
        if not 0 < cap <= 1:
            raise ScenarioValidationError("density_cap", "per-pair mass cap must lie in (0, 1]")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioValidationError("seed", "must be a non-negative integer")

    return Scenario(
        width=width,
        height=height,
        obstacles=obstacles,
        obstacle_groups=groups,
        initial_gmm=initial,
        target_gmm=target,
        n_robots=n_robots,
        robot_radius=radius,
        horizon=horizon,
        risk=risk,
        roadmap=roadmap,
        micro=micro,
        seed=seed,
        density_cap=cap,
        initial_positions=positions,
        name=str(doc.get("name", name)),
    )


def _extent(shape: ConvexShape):
    if isinstance(shape, Polygon):
        return shape.vertices.min(axis=0), shape.vertices.max(axis=0)
    c, R = shape.bounding_circle()
    return c - R, c + R


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ScenarioParseError
        Malformed YAML (message carries line and column) or missing structure.
    ScenarioValidationError
        A value violates an invariant; ``.path`` names the field.
    """
    path = Path(path)
    text = path.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioParseError(f"{path}: invalid YAML{where}: {getattr(exc, 'problem', exc)}") from None
    return parse_scenario(doc, name=path.stem)
