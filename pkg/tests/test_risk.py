import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cvar_by_integration
from swarmplan.gaussian import Gaussian2D, w2_geodesic
from swarmplan.geom2d import Disk, Point, Polygon, point_sdf_batch
from swarmplan.risk import (
    DegenerateContactError,
    RiskParams,
    ScalarGaussian,
    cvar_coefficient,
    cvar_gaussian,
    edge_collision_free,
    in_free,
    sdf_distribution,
)

SQUARE = Polygon.box(0, 0, 1, 1)


class TestCvar:
    def test_alpha_one_is_mean(self):
        assert cvar_gaussian(ScalarGaussian(3.5, 2.0), 1.0) == 3.5

    def test_half(self):
        assert cvar_gaussian(ScalarGaussian(0, 1), 0.5) == pytest.approx(0.7978845608, abs=1e-9)

    def test_five_percent(self):
        assert cvar_gaussian(ScalarGaussian(0, 1), 0.05) == pytest.approx(2.0627128, abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.01, float("nan")])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ValueError):
            cvar_gaussian(ScalarGaussian(0, 1), alpha)

    def test_matches_integration(self, rng):
        for alpha in (0.01, 0.05, 0.1, 0.5, 0.9, 1.0):
            for mu, sigma in zip(rng.uniform(-10, 10, 10), rng.uniform(0, 5, 10)):
                v = ScalarGaussian(mu, sigma)
                assert cvar_gaussian(v, alpha) == pytest.approx(cvar_by_integration(mu, sigma, alpha), abs=1e-6)

    @settings(max_examples=200)
    @given(a1=st.floats(1e-4, 1.0), a2=st.floats(1e-4, 1.0), mu=st.floats(-50, 50), sigma=st.floats(0, 20))
    def test_monotone_and_dominates_mean(self, a1, a2, mu, sigma):
        lo, hi = min(a1, a2), max(a1, a2)
        v = ScalarGaussian(mu, sigma)
        assert cvar_gaussian(v, lo) >= cvar_gaussian(v, hi) - 1e-12
        assert cvar_gaussian(v, hi) >= mu - 1e-12

    def test_coefficient_zero_at_one(self):
        assert cvar_coefficient(1.0) == 0.0


class TestSdfDistribution:
    def test_isotropic(self):
        eta = sdf_distribution(Gaussian2D((5, 0), np.eye(2)), SQUARE)
        assert eta.mean == pytest.approx(-4.0, abs=1e-12)
        assert eta.std == pytest.approx(1.0, abs=1e-12)

    def test_anisotropic(self):
        eta = sdf_distribution(Gaussian2D((5, 0), np.diag([4.0, 1.0])), SQUARE)
        assert eta.mean == pytest.approx(-4.0, abs=1e-12)
        assert eta.std == pytest.approx(2.0, abs=1e-12)

    def test_inside(self):
        eta = sdf_distribution(Gaussian2D((0.5, 0.5), np.eye(2)), SQUARE)
        assert eta.mean == pytest.approx(0.5, abs=1e-12)
        assert eta.std == pytest.approx(1.0, abs=1e-12)

    def test_degenerate(self):
        with pytest.raises(DegenerateContactError):
            sdf_distribution(Gaussian2D((1, 0.5), np.eye(2)), SQUARE)

    def test_translation_covariance(self, rng):
        for _ in range(50):
            g = Gaussian2D(rng.uniform(-5, 5, 2), [[2, 0.4], [0.4, 1]])
            off = rng.uniform(-100, 100, 2)
            a = sdf_distribution(g, SQUARE)
            b = sdf_distribution(Gaussian2D(g.mean + off, g.cov), SQUARE.translated(off))
            assert a.mean == pytest.approx(b.mean, abs=1e-9)
            assert a.std == pytest.approx(b.std, abs=1e-9)

    def test_half_plane_exact(self, rng):
        # the far edges of a huge box are out of reach, so the SDF is affine
        half_plane = Polygon.box(0, -1e4, 1e4, 1e4)
        for mean, cov in [((-4, 0), [[2, 0.5], [0.5, 1]]), ((-2, 3), [[1, -0.3], [-0.3, 0.5]]),
                          ((0.5, 0), [[0.3, 0], [0, 3]])]:
            g = Gaussian2D(mean, cov)
            eta = sdf_distribution(g, half_plane)
            X = rng.multivariate_normal(g.mean, g.cov, 100_000)
            samples = -point_sdf_batch(X, half_plane)[0]
            n = samples.size
            se_mean = eta.std / np.sqrt(n)
            se_var = eta.std**2 * np.sqrt(2 / (n - 1))
            assert abs(samples.mean() - eta.mean) < 4 * se_mean
            assert abs(samples.var(ddof=1) - eta.std**2) < 4 * se_var


class TestInFree:
    def test_far(self):
        assert in_free(Gaussian2D((5, 0.5), np.eye(2)), [SQUARE], RiskParams(0.05, 0.0))

    def test_near(self):
        assert not in_free(Gaussian2D((2, 0.5), np.eye(2)), [SQUARE], RiskParams(0.05, 0.0))

    def test_no_obstacles(self):
        assert in_free(Gaussian2D((0, 0), np.eye(2)), [], RiskParams())

    def test_degenerate_is_unsafe(self):
        assert not in_free(Gaussian2D((1, 0.5), 1e-3 * np.eye(2)), [SQUARE], RiskParams(1.0, 0.0))

    def test_prune_is_exact(self, rng):
        # compare with the unpruned CVaR condition on every obstacle
        obstacles = [Polygon.box(10, 10, 20, 30), Disk((40, 40), 5), Point((5, 40))]
        rp = RiskParams(0.1, -0.5)
        k = cvar_coefficient(rp.alpha)
        for _ in range(500):
            s1, s2 = rng.uniform(0.5, 6, 2)
            rho = rng.uniform(-0.8, 0.8)
            g = Gaussian2D(rng.uniform(0, 50, 2), [[s1 * s1, rho * s1 * s2], [rho * s1 * s2, s2 * s2]])
            try:
                full = all((e := sdf_distribution(g, o)).mean + k * e.std <= rp.delta for o in obstacles)
            except DegenerateContactError:
                continue
            assert in_free(g, obstacles, rp) == full

    def test_risk_tightening(self, rng):
        obstacles = [Polygon.box(10, 10, 20, 30)]
        for _ in range(300):
            g = Gaussian2D(rng.uniform(0, 30, 2), np.diag(rng.uniform(0.5, 20, 2)))
            for lo, hi in [(0.01, 0.05), (0.05, 0.2), (0.2, 1.0)]:
                if in_free(g, obstacles, RiskParams(lo, -1.0)):
                    assert in_free(g, obstacles, RiskParams(hi, -1.0))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            RiskParams(0.0, -1.0)
        with pytest.raises(ValueError):
            RiskParams(0.1, 0.5)


class TestEdgeCollisionFree:
    def test_constant_path(self):
        g = Gaussian2D((5, 5), np.eye(2))
        assert edge_collision_free(g, g, [SQUARE], RiskParams())

    def test_blocked_midpoint(self):
        a = Gaussian2D((-10, 0), np.eye(2))
        b = Gaussian2D((10, 0), np.eye(2))
        wall = Polygon.box(-1, -1, 1, 1)
        rp = RiskParams(0.05, 0.0)
        assert in_free(a, [wall], rp) and in_free(b, [wall], rp)
        assert not edge_collision_free(a, b, [wall], rp, resolution=3)

    def test_clear_corridor_against_dense_oracle(self):
        a = Gaussian2D((0, 0), [[2, 0.5], [0.5, 1]])
        b = Gaussian2D((30, 0), [[1, 0], [0, 3]])
        obstacle = Polygon.box(10, 15, 20, 25)  # clearance 15 > 5 * max std
        rp = RiskParams(0.05, -1.0)
        assert edge_collision_free(a, b, [obstacle], rp)
        assert all(in_free(w2_geodesic(a, b, t), [obstacle], rp) for t in np.linspace(0, 1, 1000))

    def test_endpoint_skip_agrees(self, rng):
        obstacle = Polygon.box(10, 10, 20, 20)
        rp = RiskParams()
        for _ in range(100):
            a = Gaussian2D(rng.uniform(0, 30, 2), np.diag(rng.uniform(1, 4, 2)))
            b = Gaussian2D(rng.uniform(0, 30, 2), np.diag(rng.uniform(1, 4, 2)))
            if in_free(a, [obstacle], rp) and in_free(b, [obstacle], rp):
                assert edge_collision_free(a, b, [obstacle], rp, 10, True) == \
                    edge_collision_free(a, b, [obstacle], rp, 10, False)

    def test_resolution_validated(self):
        g = Gaussian2D((0, 0), np.eye(2))
        with pytest.raises(ValueError):
            edge_collision_free(g, g, [], RiskParams(), resolution=1)
