"""CVaR collision checks between Gaussian swarm states and convex obstacles."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .gaussian import Gaussian2D, w2_geodesic
from .geom2d import ConvexShape, Point, signed_distance

__all__ = [
    "ScalarGaussian",
    "RiskParams",
    "DegenerateContactError",
    "cvar_coefficient",
    "cvar_gaussian",
    "sdf_distribution",
    "in_free",
    "edge_collision_free",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DegenerateContactError(ValueError):
    """The Gaussian mean sits on the obstacle boundary, so the normal is undefined."""


@dataclass(frozen=True)
class ScalarGaussian:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std >= 0.0:
            raise ValueError("std must be >= 0")


@dataclass(frozen=True)
class RiskParams:
    """Risk tolerance ``alpha`` in (0, 1] and safety threshold ``delta <= 0`` (m)."""

    alpha: float = 0.05
    delta: float = -1.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.delta <= 0.0:
            raise ValueError(f"delta must be <= 0, got {self.delta}")


def cvar_coefficient(alpha: float) -> float:
    """``phi(Phi^-1(1 - alpha)) / alpha``; exactly 0 at ``alpha = 1``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return 0.0
    z = float(ndtri(1.0 - alpha))
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z) / alpha


def cvar_gaussian(v: ScalarGaussian, alpha: float) -> float:
    """CVaR at level ``alpha`` of a Gaussian loss (upper tail)."""
    return v.mean + cvar_coefficient(alpha) * v.std


def sdf_distribution(g: Gaussian2D, obstacle: ConvexShape) -> ScalarGaussian:
    """Linearized distribution of the negated signed distance from ``g`` to ``obstacle``."""
    res = signed_distance(Point(g.mean), obstacle)
    if np.hypot(*(res.closest_point - g.mean)) < 1e-9:
        raise DegenerateContactError("Gaussian mean lies on the obstacle boundary")
    n = res.normal
    var = float(n @ g.cov @ n)
    return ScalarGaussian(-res.signed_distance, math.sqrt(max(var, 0.0)))


def _far_enough(g: Gaussian2D, obstacle: ConvexShape, k: float, delta: float) -> bool:
    # sound shortcut: s >= |mu - c| - R and n^T S n <= lambda_max(S)
    c, R = obstacle.bounding_circle()
    lower = math.hypot(g.mean[0] - c[0], g.mean[1] - c[1]) - R
    a, b, d = g.cov[0, 0], g.cov[0, 1], g.cov[1, 1]
    lam_max = 0.5 * (a + d) + math.hypot(0.5 * (a - d), b)
    return -lower + k * math.sqrt(lam_max) < delta - 1e-9


def in_free(g: Gaussian2D, obstacles: Sequence[ConvexShape], rp: RiskParams) -> bool:
    """True iff the CVaR of the negated SDF is at most ``delta`` for every obstacle."""
    k = cvar_coefficient(rp.alpha)
    for obs in obstacles:
        if _far_enough(g, obs, k, rp.delta):
            continue
        try:
            eta = sdf_distribution(g, obs)
        except DegenerateContactError:
            return False
        if eta.mean + k * eta.std > rp.delta:
            return False
    return True


def edge_collision_free(
    g1: Gaussian2D,
    g2: Gaussian2D,
    obstacles: Sequence[ConvexShape],
    rp: RiskParams,
    resolution: int = 10,
    check_endpoints: bool = True,
) -> bool:
    """Check ``in_free`` at ``resolution`` evenly spaced points of the W2 geodesic.

    ``check_endpoints=False`` skips ``t = 0`` and ``t = 1`` when the caller
    already knows both endpoints are free.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    ks = range(resolution) if check_endpoints else range(1, resolution - 1)
    for k in ks:
        t = k / (resolution - 1)
        g = g1 if k == 0 else g2 if k == resolution - 1 else w2_geodesic(g1, g2, t)
        if not in_free(g, obstacles, rp):
            return False
    return True
