"""Risk-aware Gaussian roadmap: sampling, construction and shortest paths."""
from __future__ import annotations

import heapq
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gaussian import Gaussian2D, from_param_vector, w2_distance, w2_distance_matrix
from .geom2d import ConvexShape, Disk, Point, Polygon
from .risk import RiskParams, edge_collision_free, in_free

__all__ = [
    "RoadmapParams",
    "GaussianRoadmap",
    "SamplingExhaustedError",
    "SeedUnsafeError",
    "sample_free",
    "neighbours",
    "build_roadmap",
    "shortest_path",
    "dijkstra",
]

ATTEMPTS_PER_SAMPLE = 1000


class SamplingExhaustedError(RuntimeError):
    def __init__(self, wanted: int, found: int, attempts: int):
        self.wanted, self.found, self.attempts = wanted, found, attempts
        rate = found / attempts if attempts else 0.0
        super().__init__(
            f"found only {found} of {wanted} free samples in {attempts} attempts "
            f"(acceptance rate {rate:.3g})"
        )


class SeedUnsafeError(ValueError):
    def __init__(self, index: int, seed: Gaussian2D):
        self.index, self.seed = index, seed
        super().__init__(
            f"seed {index} (mean {seed.mean.tolist()}) violates the risk constraint"
        )


@dataclass(frozen=True)
class RoadmapParams:
    """Sampling and connection settings.

    ``r`` is the connection radius in W2 meters, ``sampler_mix`` the share of
    obstacle-biased samples; ``bounds`` is ``(xmin, ymin, xmax, ymax)``.
    """

    n: int = 500
    r: float = 20.0
    resolution: int = 10
    sampler_mix: float = 0.3
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 200.0, 160.0)
    sigma1_range: tuple[float, float] = (2.0, 15.0)
    sigma2_range: tuple[float, float] = (2.0, 15.0)
    rho_range: tuple[float, float] = (-0.8, 0.8)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if not self.r > 0:
            raise ValueError("r must be > 0")
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if not 0.0 <= self.sampler_mix <= 1.0:
            raise ValueError("sampler_mix must lie in [0, 1]")
        x0, y0, x1, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("bounds must be a non-empty rectangle")
        for name in ("sigma1_range", "sigma2_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be positive and non-empty")
        lo, hi = self.rho_range
        if not -1 < lo <= hi < 1:
            raise ValueError("rho_range must lie inside (-1, 1)")


@dataclass
class GaussianRoadmap:
    """Undirected graph over Gaussian nodes with W2 edge weights."""

    nodes: list[Gaussian2D]
    adjacency: list[dict[int, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.adjacency:
            self.adjacency = [dict() for _ in self.nodes]

    def add_edge(self, i: int, j: int, w: float) -> None:
        self.adjacency[i][j] = w
        self.adjacency[j][i] = w

    def edges(self):
        """Undirected edges ``(i, j, w)`` with ``i < j`` in sorted order."""
        for i, nbrs in enumerate(self.adjacency):
            for j in sorted(nbrs):
                if i < j:
                    yield i, j, nbrs[j]

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def index_of(self, g: Gaussian2D) -> int:
        for k, node in enumerate(self.nodes):
            if node == g:
                return k
        raise KeyError("Gaussian not in roadmap")

    def to_dict(self) -> dict:
        """Nodes as 5-parameter vectors plus the raw covariance entries.

        ``covariances`` holds ``[cov_xx, cov_xy, cov_yy]`` per node so a
        reload is bit-exact; the parameter vectors are for reading.
        """
        return {
            "nodes": [list(n.params()) for n in self.nodes],
            "covariances": [[float(n.cov[0, 0]), float(n.cov[0, 1]), float(n.cov[1, 1])] for n in self.nodes],
            "edges": [[i, j, w] for i, j, w in self.edges()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianRoadmap":
        covs = data.get("covariances")
        if covs is None:
            nodes = [from_param_vector(v) for v in data["nodes"]]
        else:
            nodes = [Gaussian2D(v[:2], [[c[0], c[1]], [c[1], c[2]]]) for v, c in zip(data["nodes"], covs)]
        g = cls(nodes)
        for i, j, w in data["edges"]:
            g.add_edge(int(i), int(j), float(w))
        return g

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "GaussianRoadmap":
        return cls.from_dict(json.loads(text))


def _boundary_point(shape: ConvexShape, rng: np.random.Generator) -> np.ndarray:
    if isinstance(shape, Polygon):
        V = shape.vertices
        E = np.roll(V, -1, axis=0) - V
        lengths = np.linalg.norm(E, axis=1)
        k = int(np.searchsorted(np.cumsum(lengths), rng.uniform(0, lengths.sum()), side="right"))
        k = min(k, len(V) - 1)
        return V[k] + rng.uniform() * E[k]
    if isinstance(shape, Disk):
        a = rng.uniform(0, 2 * math.pi)
        return shape.center + shape.radius * np.array([math.cos(a), math.sin(a)])
    if isinstance(shape, Point):
        return shape.position.copy()
    raise TypeError(f"unsupported shape {type(shape).__name__}")


def _draw_candidate(params: RoadmapParams, obstacles, rng: np.random.Generator):
    x0, y0, x1, y1 = params.bounds
    if obstacles and rng.uniform() < params.sampler_mix:
        # obstacle-biased draw: perturb a boundary point
        k = int(rng.integers(len(obstacles)))
        mean = _boundary_point(obstacles[k], rng) + rng.normal(0.0, params.r / 2.0, size=2)
    else:
        mean = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
    s1 = rng.uniform(*params.sigma1_range)
    s2 = rng.uniform(*params.sigma2_range)
    rho = rng.uniform(*params.rho_range)
    if not (x0 <= mean[0] <= x1 and y0 <= mean[1] <= y1):
        return None
    return from_param_vector((mean[0], mean[1], s1, s2, rho))


def sample_free(
    n: int,
    obstacles: Sequence[ConvexShape],
    rp: RiskParams,
    params: RoadmapParams,
    rng: np.random.Generator,
) -> list[Gaussian2D]:
    """Draw ``n`` Gaussians that pass :func:`in_free`, by rejection."""
    if n < 0:
        raise ValueError("n must be >= 0")
    out: list[Gaussian2D] = []
    attempts = 0
    limit = ATTEMPTS_PER_SAMPLE * n
    while len(out) < n:
        if attempts >= limit:
            raise SamplingExhaustedError(n, len(out), attempts)
        attempts += 1
        g = _draw_candidate(params, obstacles, rng)
        if g is not None and in_free(g, obstacles, rp):
            out.append(g)
    return out


def neighbours(candidates: Sequence[Gaussian2D], g: Gaussian2D, r: float) -> list[int]:
    """Indices of candidates within W2 distance ``r`` of ``g`` (inclusive), ``g`` excluded."""
    if not r > 0:
        raise ValueError("r must be > 0")
    return [k for k, c in enumerate(candidates) if not c == g and w2_distance(g, c) <= r]


def _stack(nodes: Sequence[Gaussian2D]):
    means = np.array([n.mean for n in nodes]).reshape(-1, 2)
    covs = np.array([n.cov for n in nodes]).reshape(-1, 2, 2)
    return means, covs


def build_roadmap(
    params: RoadmapParams,
    obstacles: Sequence[ConvexShape],
    rp: RiskParams,
    seeds: Sequence[Gaussian2D],
    rng: np.random.Generator,
    workers: int = 1,
) -> GaussianRoadmap:
    """Construct the roadmap over ``seeds`` plus ``params.n`` free samples.

    Duplicate seeds collapse into one node.  Candidate edges are all pairs
    within ``params.r`` whose geodesic passes :func:`edge_collision_free`;
    the graph is identical for any ``workers`` count.
    """
    unique: list[Gaussian2D] = []
    for k, s in enumerate(seeds):
        if not in_free(s, obstacles, rp):
            raise SeedUnsafeError(k, s)
        if not any(s == u for u in unique):
            unique.append(s)
    nodes = unique + sample_free(params.n, obstacles, rp, params, rng)
    graph = GaussianRoadmap(nodes)
    if len(nodes) < 2:
        return graph

    means, covs = _stack(nodes)
    D = w2_distance_matrix(means, covs, means, covs)
    iu, ju = np.nonzero(np.triu(D <= params.r, k=1))
    pairs = list(zip(iu.tolist(), ju.tolist()))

    def check(pair):
        i, j = pair
        return edge_collision_free(nodes[i], nodes[j], obstacles, rp,
                                   params.resolution, check_endpoints=False)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ok = list(pool.map(check, pairs, chunksize=64))
    else:
        ok = [check(p) for p in pairs]
    for (i, j), free in zip(pairs, ok):
        if free:
            w = w2_distance(nodes[i], nodes[j])
            if w <= params.r:
                graph.add_edge(i, j, w)
    return graph


def dijkstra(graph: GaussianRoadmap, src: int) -> tuple[np.ndarray, np.ndarray]:
    """Single-source shortest paths.

    Returns ``(dist, pred)``; unreachable nodes have ``inf`` distance and
    ``-1`` predecessor.  Equal-cost ties resolve to the lowest node index.
    """
    n = len(graph.nodes)
    if not 0 <= src < n:
        raise ValueError(f"invalid node index {src}")
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=int)
    dist[src] = 0.0
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in sorted(graph.adjacency[u].items()):
            if done[v]:
                continue
            nd = d + w
            if nd < dist[v] or (nd == dist[v] and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def _trace(pred: np.ndarray, src: int, dst: int) -> list[int]:
    path = [dst]
    while path[-1] != src:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def shortest_path(graph: GaussianRoadmap, src: int, dst: int):
    """Minimum-W2 route from ``src`` to ``dst``.

    Returns ``(path, cost)`` or ``None`` when ``dst`` is unreachable.
    """
    n = len(graph.nodes)
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError(f"invalid node index ({src}, {dst}) for {n} nodes")
    dist, pred = dijkstra(graph, src)
    if not np.isfinite(dist[dst]):
        return None
    return _trace(pred, src, dst), float(dist[dst])
