"""Wasserstein geometry of 2-D Gaussians.

All matrix functions use closed forms for 2x2 symmetric matrices; nothing
here calls a general eigensolver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SPD_EIG_MIN",
    "Gaussian2D",
    "AffineMap",
    "validate_spd",
    "spd_sqrt",
    "spd_inv_sqrt",
    "w2_distance",
    "w2_distance_matrix",
    "w2_geodesic",
    "ot_map",
    "from_param_vector",
    "to_param_vector",
]

SPD_EIG_MIN = 1e-12


def _min_eig(m: np.ndarray) -> float:
    a, b, d = m[0, 0], m[0, 1], m[1, 1]
    half_tr = 0.5 * (a + d)
    disc = math.hypot(0.5 * (a - d), b)
    return half_tr - disc


def validate_spd(m) -> np.ndarray:
    """Return ``m`` as a float array, raising ValueError unless it is SPD."""
    m = np.array(m, dtype=float)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        raise ValueError("expected a finite 2x2 matrix")
    scale = max(1.0, float(np.max(np.abs(m))))
    if abs(m[0, 1] - m[1, 0]) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    m[1, 0] = m[0, 1]
    if not _min_eig(m) > SPD_EIG_MIN:
        raise ValueError("matrix is not positive definite")
    return m


@dataclass(frozen=True, eq=False)
class Gaussian2D:
    """Planar Gaussian ``N(mean, cov)`` (meters, square meters)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mean, dtype=float).reshape(2)
        if not np.all(np.isfinite(mu)):
            raise ValueError("mean must be finite")
        cov = validate_spd(self.cov)
        mu.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", cov)

    def __eq__(self, other):
        if not isinstance(other, Gaussian2D):
            return NotImplemented
        return bool(np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov))

    def __hash__(self):
        return hash((self.mean.tobytes(), self.cov.tobytes()))

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diff = x - self.mean
        a, b, d = self.cov[0, 0], self.cov[0, 1], self.cov[1, 1]
        det = a * d - b * b
        q = (d * diff[..., 0] ** 2 - 2 * b * diff[..., 0] * diff[..., 1] + a * diff[..., 1] ** 2) / det
        return np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))

    def params(self) -> tuple[float, float, float, float, float]:
        return to_param_vector(self)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.multivariate_normal(self.mean, self.cov, size=size)


@dataclass(frozen=True)
class AffineMap:
    """``x -> linear @ x + offset``."""

    linear: np.ndarray
    offset: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.offset


def spd_sqrt(m) -> np.ndarray:
    """Principal square root of a 2x2 SPD matrix.

    Uses ``sqrt(M) = (M + s I) / sqrt(tr M + 2 s)`` with ``s = sqrt(det M)``.
    """
    m = validate_spd(m)
    s = math.sqrt(m[0, 0] * m[1, 1] - m[0, 1] * m[0, 1])
    t = math.sqrt(m[0, 0] + m[1, 1] + 2.0 * s)
    r = np.array([[m[0, 0] + s, m[0, 1]], [m[0, 1], m[1, 1] + s]]) / t
    return r


def _inv2(m: np.ndarray) -> np.ndarray:
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def spd_inv_sqrt(m) -> np.ndarray:
    return _inv2(spd_sqrt(m))


def _sym(m: np.ndarray) -> np.ndarray:
    off = 0.5 * (m[0, 1] + m[1, 0])
    return np.array([[m[0, 0], off], [off, m[1, 1]]])


def _cross_root(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """``C = (S1^1/2 S2 S1^1/2)^1/2``."""
    r1 = spd_sqrt(s1)
    return spd_sqrt(_sym(r1 @ s2 @ r1))


def _trace_cross_root(s1, s2) -> float:
    # tr C = sqrt(tr(S1 S2) + 2 sqrt(det S1 det S2)); written symmetrically
    tr12 = s1[0, 0] * s2[0, 0] + 2.0 * (s1[0, 1] * s2[0, 1]) + s1[1, 1] * s2[1, 1]
    det1 = s1[0, 0] * s1[1, 1] - s1[0, 1] * s1[0, 1]
    det2 = s2[0, 0] * s2[1, 1] - s2[0, 1] * s2[0, 1]
    return math.sqrt(max(tr12 + 2.0 * math.sqrt(det1 * det2), 0.0))


def w2_distance(g1: Gaussian2D, g2: Gaussian2D) -> float:
    """2-Wasserstein distance between two Gaussians (meters)."""
    if g1 is g2 or g1 == g2:
        return 0.0
    s1, s2 = g1.cov, g2.cov
    dm = (g1.mean[0] - g2.mean[0]) ** 2 + (g1.mean[1] - g2.mean[1]) ** 2
    tr = (s1[0, 0] + s2[0, 0]) + (s1[1, 1] + s2[1, 1])
    w2sq = dm + tr - 2.0 * _trace_cross_root(s1, s2)
    return math.sqrt(max(w2sq, 0.0))


def w2_distance_matrix(means1, covs1, means2, covs2) -> np.ndarray:
    """Pairwise W2 distances between two batches of Gaussians.

    Parameters
    ----------
    means1 : array, shape (n1, 2)
    covs1 : array, shape (n1, 2, 2)
    means2 : array, shape (n2, 2)
    covs2 : array, shape (n2, 2, 2)

    Returns
    -------
    D : ndarray, shape (n1, n2)
    """
    m1 = np.asarray(means1, dtype=float)[:, None, :]
    m2 = np.asarray(means2, dtype=float)[None, :, :]
    c1 = np.asarray(covs1, dtype=float)[:, None]
    c2 = np.asarray(covs2, dtype=float)[None, :]
    a1, b1, d1 = c1[..., 0, 0], c1[..., 0, 1], c1[..., 1, 1]
    a2, b2, d2 = c2[..., 0, 0], c2[..., 0, 1], c2[..., 1, 1]
    dm = (m1[..., 0] - m2[..., 0]) ** 2 + (m1[..., 1] - m2[..., 1]) ** 2
    tr = (a1 + a2) + (d1 + d2)
    tr12 = a1 * a2 + 2.0 * (b1 * b2) + d1 * d2
    det12 = (a1 * d1 - b1 * b1) * (a2 * d2 - b2 * b2)
    trc = np.sqrt(np.maximum(tr12 + 2.0 * np.sqrt(det12), 0.0))
    return np.sqrt(np.maximum(dm + tr - 2.0 * trc, 0.0))


def _transport_linear(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Symmetric ``A`` with ``A S1 A = S2``."""
    r1 = spd_sqrt(s1)
    r1i = _inv2(r1)
    c = spd_sqrt(_sym(r1 @ s2 @ r1))
    return _sym(r1i @ c @ r1i)


def ot_map(g1: Gaussian2D, g2: Gaussian2D) -> AffineMap:
    """Optimal transport map pushing ``g1`` onto ``g2``.

    ``T(x) = mu2 + A (x - mu1)`` with
    ``A = S1^-1/2 (S1^1/2 S2 S1^1/2)^1/2 S1^-1/2``.
    """
    if g1 == g2:
        return AffineMap(np.eye(2), np.zeros(2))
    A = _transport_linear(g1.cov, g2.cov)
    return AffineMap(A, g2.mean - A @ g1.mean)


def w2_geodesic(g1: Gaussian2D, g2: Gaussian2D, t: float) -> Gaussian2D:
    """Point at fraction ``t`` along the W2 geodesic from ``g1`` to ``g2``.

    The covariance ``S1^-1/2 [(1-t) S1 + t C]^2 S1^-1/2`` is evaluated as
    ``K S1 K`` with ``K = (1-t) I + t A``, which keeps it symmetric.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return g1
    mean = (1.0 - t) * g1.mean + t * g2.mean
    A = _transport_linear(g1.cov, g2.cov)
    K = (1.0 - t) * np.eye(2) + t * A
    return Gaussian2D(mean, _sym(K @ g1.cov @ K))


def from_param_vector(v) -> Gaussian2D:
    """Build ``N([x, y], [[s1^2, r s1 s2], [r s1 s2, s2^2]])`` from ``[x, y, s1, s2, r]``."""
    x, y, s1, s2, rho = (float(c) for c in v)
    if not (s1 > 0 and s2 > 0):
        raise ValueError("sigma1 and sigma2 must be positive")
    if not abs(rho) < 1:
        raise ValueError("rho must lie in (-1, 1)")
    c = rho * s1 * s2
    return Gaussian2D((x, y), [[s1 * s1, c], [c, s2 * s2]])


def to_param_vector(g: Gaussian2D) -> tuple[float, float, float, float, float]:
    s1 = math.sqrt(g.cov[0, 0])
    s2 = math.sqrt(g.cov[1, 1])
    return float(g.mean[0]), float(g.mean[1]), s1, s2, float(g.cov[0, 1] / (s1 * s2))
