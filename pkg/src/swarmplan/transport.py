"""Mixture-level optimal transport.

Contains the (optionally capacitated) transportation simplex used for the
macroscopic weight allocation, the mixture metric built on it, and the
piecewise-geodesic GMM trajectory assembled from roadmap routes.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .gaussian import Gaussian2D, w2_distance, w2_distance_matrix, w2_geodesic
from .roadmap import GaussianRoadmap

__all__ = [
    "InfeasibleTransportError",
    "GMM",
    "LPResult",
    "TransportPlan",
    "PairTrajectory",
    "GmmTrajectory",
    "transport_simplex",
    "solve_transport_lp",
    "gmm_distance",
    "gmm_geodesic",
    "assemble_trajectory",
    "density_at",
]

WEIGHT_TOL = 1e-9
_MASS_TOL = 1e-12


class InfeasibleTransportError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GMM:
    """Weighted mixture of planar Gaussians."""

    components: tuple[Gaussian2D, ...]
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if not comps:
            raise ValueError("a GMM needs at least one component")
        if len(comps) != len(w):
            raise ValueError("components and weights differ in length")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("GMM weights must be positive")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"GMM weights sum to {w.sum():.12g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.components)

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for w, g in zip(self.weights, self.components):
            out = out + w * g.pdf(x)
        return out

    def merged(self, tol: float = 1e-9) -> "GMM":
        """Merge components whose parameters agree within ``tol``."""
        comps: list[Gaussian2D] = []
        weights: list[float] = []
        for w, g in zip(self.weights, self.components):
            for k, c in enumerate(comps):
                if np.max(np.abs(c.mean - g.mean)) <= tol and np.max(np.abs(c.cov - g.cov)) <= tol:
                    weights[k] += w
                    break
            else:
                comps.append(g)
                weights.append(float(w))
        return GMM(tuple(comps), np.array(weights))


# -- transportation simplex ----------------------------------------------------


@dataclass
class LPResult:
    """Optimal plan with its certificate.

    ``row_duals``/``col_duals`` make ``c - u_i - v_j`` non-negative on cells at
    zero, non-positive on cells at their cap, and zero on cells strictly
    between.
    """

    lam: np.ndarray
    objective: float
    row_duals: np.ndarray
    col_duals: np.ndarray
    pivots: int


def _vogel(c: np.ndarray, a: np.ndarray, b: np.ndarray):
    m, n = c.shape
    s, d = a.copy(), b.copy()
    x = np.zeros((m, n))
    basis: list[tuple[int, int]] = []
    rows, cols = list(range(m)), list(range(n))

    def penalty(vals):
        if len(vals) == 1:
            return vals[0]
        two = sorted(vals)[:2]
        return two[1] - two[0]

    while rows and cols:
        best = None
        for i in rows:
            p = penalty([c[i, j] for j in cols])
            if best is None or p > best[0]:
                best = (p, "r", i)
        for j in cols:
            p = penalty([c[i, j] for i in rows])
            if p > best[0]:
                best = (p, "c", j)
        _, kind, k = best
        if kind == "r":
            i = k
            j = min(cols, key=lambda jj: (c[i, jj], jj))
        else:
            j = k
            i = min(rows, key=lambda ii: (c[ii, j], ii))
        q = min(s[i], d[j])
        x[i, j] = q
        basis.append((i, j))
        s[i] -= q
        d[j] -= q
        # cross out exactly one line per allocation
        if len(rows) == 1 and len(cols) == 1:
            rows.remove(i)
            cols.remove(j)
        elif len(rows) == 1:
            cols.remove(j)
        elif len(cols) == 1:
            rows.remove(i)
        elif s[i] <= d[j]:
            rows.remove(i)
        else:
            cols.remove(j)
    return x, basis


def _duals(c, basis, m, n):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    by_row = [[] for _ in range(m)]
    by_col = [[] for _ in range(n)]
    for i, j in basis:
        by_row[i].append(j)
        by_col[j].append(i)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in by_row[k]:
                if np.isnan(v[j]):
                    v[j] = c[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in by_col[k]:
                if np.isnan(u[i]):
                    u[i] = c[i, k] - v[k]
                    queue.append(("r", i))
    return u, v


def _tree_path(basis, m, i, j):
    """Basic cells on the tree path from column ``j`` back to row ``i``."""
    adj: dict[int, list[int]] = {}
    for (r, cc) in basis:
        adj.setdefault(r, []).append(m + cc)
        adj.setdefault(m + cc, []).append(r)
    start, goal = m + j, i
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nb in sorted(adj.get(node, [])):
            if nb not in prev:
                prev[nb] = node
                queue.append(nb)
    cells = []
    node = goal
    while prev[node] is not None:
        p = prev[node]
        r, cc = (node, p - m) if node < m else (p, node - m)
        cells.append((r, cc))
        node = p
    return cells[::-1]


def _simplex(c, cap, x, basis, max_pivots=100000):
    """Bounded-variable transportation simplex with Bland's rule."""
    m, n = c.shape
    scale = max(1.0, float(np.max(np.abs(c))))
    tol = 1e-12 * scale
    basis = list(basis)
    pivots = 0
    while True:
        u, v = _duals(c, basis, m, n)
        red = c - u[:, None] - v[None, :]
        in_basis = np.zeros((m, n), dtype=bool)
        for cell in basis:
            in_basis[cell] = True
        enter = None
        for i in range(m):
            for j in range(n):
                if in_basis[i, j] or cap[i, j] == 0.0:
                    continue
                if x[i, j] < cap[i, j] and red[i, j] < -tol and x[i, j] == 0.0:
                    enter, sign = (i, j), 1.0
                elif x[i, j] == cap[i, j] and red[i, j] > tol:
                    enter, sign = (i, j), -1.0
                if enter is not None:
                    break
            if enter is not None:
                break
        if enter is None:
            return x, basis, u, v, pivots
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("transportation simplex did not converge")
        i, j = enter
        path = _tree_path(basis, m, i, j)
        # cells on the path alternate -, +, -, ... relative to the entering move
        signs = [-sign if k % 2 == 0 else sign for k in range(len(path))]
        theta = cap[i, j] if sign > 0 else x[i, j]
        leave, leave_at = enter, None
        for cell, sg in zip(path, signs):
            room = x[cell] if sg < 0 else cap[cell] - x[cell]
            if room < theta or (room == theta and leave != enter and cell < leave):
                theta, leave = room, cell
                leave_at = 0.0 if sg < 0 else cap[cell]
        if not np.isfinite(theta):
            raise RuntimeError("unbounded transportation problem")
        x[i, j] += sign * theta
        for cell, sg in zip(path, signs):
            x[cell] += sg * theta
            if abs(x[cell]) <= _MASS_TOL:
                x[cell] = 0.0
            elif abs(x[cell] - cap[cell]) <= _MASS_TOL:
                x[cell] = cap[cell]
        if leave != enter:
            basis.remove(leave)
            basis.append(enter)
            x[leave] = leave_at


def _check_weights(w, name):
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError(f"{name} must be non-negative and finite")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"{name} sums to {w.sum():.12g}, not 1")
    return w


def transport_simplex(costs, w0, wf, caps=None) -> LPResult:
    """Solve the balanced transportation LP.

    Minimizes ``sum lam_ij c_ij`` subject to row sums ``w0``, column sums
    ``wf`` and ``0 <= lam <= caps``.  Infinite costs mark forbidden cells.

    Raises
    ------
    InfeasibleTransportError
        If the caps or forbidden cells leave no feasible plan.
    """
    c = np.array(costs, dtype=float)
    a = _check_weights(w0, "w0")
    b = _check_weights(wf, "wf")
    if c.shape != (a.size, b.size):
        raise ValueError(f"cost matrix shape {c.shape} does not match weights ({a.size}, {b.size})")
    if np.any(np.isnan(c)) or np.any(c == -np.inf):
        raise ValueError("costs must be finite or +inf")
    forbidden = ~np.isfinite(c)
    if caps is None:
        u = np.full(c.shape, np.inf)
    else:
        u = np.broadcast_to(np.asarray(caps, dtype=float), c.shape).copy()
        if np.any(np.isnan(u)) or np.any(u < 0):
            raise ValueError("caps must be non-negative")
    u[forbidden] = 0.0
    c_fin = np.where(forbidden, 0.0, c)
    m, n = c.shape

    if caps is None and not forbidden.any():
        x, basis = _vogel(c_fin, a, b)
        x, basis, ru, rv, piv = _simplex(c_fin, u, x, basis)
        return LPResult(x, float(np.sum(x * c_fin)), ru, rv, piv)

    if np.any(u.sum(axis=1) < a - WEIGHT_TOL) or np.any(u.sum(axis=0) < b - WEIGHT_TOL):
        raise InfeasibleTransportError("caps cannot carry the required marginals")
    # phase 1 on an extended problem: dummy row D and dummy column E
    C1 = np.zeros((m + 1, n + 1))
    C1[:m, n] = 1.0
    C1[m, :n] = 1.0
    U = np.full((m + 1, n + 1), np.inf)
    U[:m, :n] = u
    X = np.zeros((m + 1, n + 1))
    X[:m, n] = a
    X[m, :n] = b
    basis = [(i, n) for i in range(m)] + [(m, j) for j in range(n)] + [(m, n)]
    X, basis, _, _, piv1 = _simplex(C1, U, X, basis)
    infeasibility = float(X[:m, n].sum() + X[m, :n].sum())
    if infeasibility > 1e-9:
        raise InfeasibleTransportError(
            f"no feasible plan: {0.5 * infeasibility:.3g} mass cannot be routed"
        )
    X[:m, n] = 0.0
    X[m, :n] = 0.0
    U[:m, n] = 0.0
    U[m, :n] = 0.0
    X[m, n] = 1.0
    C2 = np.zeros((m + 1, n + 1))
    C2[:m, :n] = c_fin
    X, basis, ru, rv, piv2 = _simplex(C2, U, X, basis)
    lam = X[:m, :n].copy()
    return LPResult(lam, float(np.sum(lam * c_fin)), ru[:m], rv[:n], piv1 + piv2)


def solve_transport_lp(costs, w0, wf, caps=None) -> np.ndarray:
    """Optimal mass allocation ``lam`` (N1 x N2) for the transport LP."""
    return transport_simplex(costs, w0, wf, caps).lam


# -- mixture metric ------------------------------------------------------------


def _stack(comps):
    return (np.array([g.mean for g in comps]), np.array([g.cov for g in comps]))


def gmm_distance(a: GMM, b: GMM) -> tuple[float, np.ndarray]:
    """Mixture distance and the optimal coupling of component weights."""
    ma, ca = _stack(a.components)
    mb, cb = _stack(b.components)
    cost = w2_distance_matrix(ma, ca, mb, cb) ** 2
    res = transport_simplex(cost, a.weights, b.weights)
    return math.sqrt(max(res.objective, 0.0)), res.lam


def gmm_geodesic(a: GMM, b: GMM, coupling, t: float) -> GMM:
    """Mixture of pairwise W2 geodesics weighted by the coupling."""
    pi = np.asarray(coupling, dtype=float)
    if pi.shape != (len(a), len(b)):
        raise ValueError("coupling shape does not match the mixtures")
    if not (np.allclose(pi.sum(axis=1), a.weights, atol=WEIGHT_TOL)
            and np.allclose(pi.sum(axis=0), b.weights, atol=WEIGHT_TOL)):
        raise ValueError("coupling marginals do not match the mixture weights")
    comps, weights = [], []
    for i, ga in enumerate(a.components):
        for j, gb in enumerate(b.components):
            if pi[i, j] > _MASS_TOL:
                comps.append(w2_geodesic(ga, gb, t))
                weights.append(pi[i, j])
    w = np.array(weights)
    return GMM(tuple(comps), w / w.sum())


# -- plan and trajectory -------------------------------------------------------


@dataclass
class TransportPlan:
    """Weights ``lam[i, j]``, path costs and roadmap routes per component pair."""

    lam: np.ndarray
    costs: np.ndarray
    routes: dict[tuple[int, int], list[int]]

    def active_pairs(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.lam > _MASS_TOL))]


@dataclass
class PairTrajectory:
    """Piecewise-geodesic Gaussian trajectory along one roadmap route."""

    pair: tuple[int, int]
    weight: float
    route: list[int]
    nodes: list[Gaussian2D]
    breakpoints: np.ndarray  # len(route) times, first T0, last Tf

    @property
    def n_segments(self) -> int:
        return max(len(self.route) - 1, 0)

    def segment_at(self, t: float) -> tuple[int, float]:
        """Edge index and local fraction ``tau`` at time ``t``."""
        if self.n_segments == 0:
            return -1, 0.0
        bp = self.breakpoints
        k = int(np.searchsorted(bp, t, side="right")) - 1
        k = min(max(k, 0), self.n_segments - 1)
        span = bp[k + 1] - bp[k]
        tau = 1.0 if span <= 0 else min(max((t - bp[k]) / span, 0.0), 1.0)
        return k, tau

    def at(self, t: float) -> Gaussian2D:
        k, tau = self.segment_at(t)
        if k < 0:
            return self.nodes[0]
        if tau == 1.0:
            return self.nodes[k + 1]
        return w2_geodesic(self.nodes[k], self.nodes[k + 1], tau)


@dataclass
class GmmTrajectory:
    pairs: list[PairTrajectory]
    t0: float
    tf: float

    def _check_time(self, t):
        if not self.t0 - 1e-12 <= t <= self.tf + 1e-12:
            raise ValueError(f"t={t} outside [{self.t0}, {self.tf}]")

    def at(self, t: float) -> GMM:
        self._check_time(t)
        w = np.array([p.weight for p in self.pairs])
        return GMM(tuple(p.at(t) for p in self.pairs), w / w.sum())

    def pair(self, i: int, j: int) -> PairTrajectory:
        for p in self.pairs:
            if p.pair == (i, j):
                return p
        raise KeyError((i, j))

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "tf": self.tf,
            "pairs": [
                {
                    "i": p.pair[0],
                    "j": p.pair[1],
                    "lambda": p.weight,
                    "route": list(p.route),
                    "breakpoints": [float(b) for b in p.breakpoints],
                }
                for p in self.pairs
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict, graph: GaussianRoadmap) -> "GmmTrajectory":
        pairs = [
            PairTrajectory(
                (int(d["i"]), int(d["j"])),
                float(d["lambda"]),
                [int(k) for k in d["route"]],
                [graph.nodes[int(k)] for k in d["route"]],
                np.array(d["breakpoints"], dtype=float),
            )
            for d in data["pairs"]
        ]
        return cls(pairs, float(data["t0"]), float(data["tf"]))


def assemble_trajectory(plan: TransportPlan, graph: GaussianRoadmap, horizon) -> GmmTrajectory:
    """Turn each active route into a time-parameterized Gaussian trajectory.

    Time along a route is allotted in proportion to edge W2 lengths, so every
    pair moves at constant Wasserstein speed over ``[T0, Tf]``.
    """
    t0, tf = (float(h) for h in horizon)
    if not tf > t0:
        raise ValueError("horizon must satisfy Tf > T0")
    pairs = []
    for i, j in plan.active_pairs():
        route = plan.routes.get((i, j))
        if route is None:
            raise ValueError(f"pair ({i}, {j}) carries mass but has no route")
        nodes = [graph.nodes[k] for k in route]
        lengths = np.array([w2_distance(nodes[k], nodes[k + 1]) for k in range(len(route) - 1)])
        total = lengths.sum()
        if len(route) == 1:
            bp = np.array([t0])
        elif total > 0:
            bp = t0 + (tf - t0) * np.concatenate([[0.0], np.cumsum(lengths)]) / total
            bp[-1] = tf
        else:
            bp = np.linspace(t0, tf, len(route))
        pairs.append(PairTrajectory((i, j), float(plan.lam[i, j]), list(route), nodes, bp))
    return GmmTrajectory(pairs, t0, tf)


def density_at(traj: GmmTrajectory, t: float, x) -> np.ndarray:
    """Mixture density of the trajectory at time ``t`` and positions ``x`` (1/m^2)."""
    traj._check_time(t)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for p in traj.pairs:
        out = out + p.weight * p.at(t).pdf(x)
    return out
