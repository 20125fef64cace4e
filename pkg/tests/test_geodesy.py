import numpy as np
import pytest

from app.config.settings import DistanceOptions, ShootingOptions
from app.errors import ArgumentError, DimensionError, DomainEscape, InvariantBreach
from app.geometry.geodesy import (
    cc_distance,
    distance_matrix,
    distance_lower_bound,
    geodesic_between,
    integrate_control,
    normal_geodesic,
    projection_bound,
)
from app.geometry.library import euclidean, grushin, heisenberg, martinet, martinet_abnormal_control
from app.geometry.shooting import shoot, shoot_many
from app.geometry.structure import SubRiemannianStructure


class TestIntegrateControl:
    def test_grushin_axis(self):
        curve = integrate_control(grushin(), (0.0, 0.0), [(1.0, 0.0)])
        np.testing.assert_allclose(curve.end, (1.0, 0.0), atol=1e-12)
        assert curve.length == pytest.approx(1.0)

    def test_grushin_vertical(self):
        curve = integrate_control(grushin(), (1.0, 0.0), [(0.0, 1.0)])
        np.testing.assert_allclose(curve.end, (1.0, 1.0), atol=1e-12)
        assert curve.length == pytest.approx(1.0)

    def test_heisenberg_two_segments(self):
        curve = integrate_control(heisenberg(), (0.0, 0.0, 0.0), [(1.0, 0.0), (0.0, 1.0)], T=2.0)
        np.testing.assert_allclose(curve.end, (1.0, 1.0, 1.0), atol=1e-12)

    def test_quadratic_drift(self):
        curve = integrate_control(grushin(), (0.0, 0.0), [(1.0, 1.0)])
        np.testing.assert_allclose(curve.end, (1.0, 0.5), atol=1e-12)

    def test_martinet_abnormal_curve(self):
        curve = integrate_control(martinet(), (0.0, 0.0, 0.0), martinet_abnormal_control(4))
        np.testing.assert_allclose(curve.end, (0.0, 1.0, 0.0), atol=1e-12)
        assert curve.length == pytest.approx(1.0)

    def test_box_escape(self):
        S = grushin()
        boxed = SubRiemannianStructure(S.dim, S.generators, "boxed", box=((-0.5, -0.5), (0.5, 0.5)))
        with pytest.raises(DomainEscape):
            integrate_control(boxed, (0.0, 0.0), [(1.0, 0.0)])

    def test_bad_duration(self):
        with pytest.raises(ArgumentError):
            integrate_control(grushin(), (0.0, 0.0), [(1.0, 0.0)], T=0.0)


class TestNormalGeodesic:
    def test_euclidean_line(self):
        curve = normal_geodesic(euclidean(2), (0.0, 0.0), (1.0, 0.0))
        np.testing.assert_allclose(curve.state_at(0.5), (0.5, 0.0), atol=1e-12)

    def test_grushin_axis_unit_speed(self):
        curve = normal_geodesic(grushin(), (0.0, 0.0), (1.0, 0.0))
        np.testing.assert_allclose(curve.end, (1.0, 0.0), atol=1e-12)
        np.testing.assert_allclose(curve.speeds, 1.0)

    def test_trivial_covector(self):
        with pytest.raises(ArgumentError):
            normal_geodesic(heisenberg(), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0))

    def test_hamiltonian_is_conserved(self):
        curve = normal_geodesic(heisenberg(), (0.0, 0.0, 0.0), (1.0, 0.5, 2.0), T=2.0)
        speeds = curve.speeds
        assert np.ptp(speeds) < 1e-8 * speeds.max()


class TestLowerBounds:
    def test_projection_bound(self):
        assert projection_bound(grushin(), np.zeros(2), np.array([0.7, 3.0])) == pytest.approx(0.7)
        assert projection_bound(heisenberg(), np.zeros(3), np.array([0.0, 0.0, 1.0])) == 0.0

    def test_bounds_are_below_known_distance(self):
        for mode in ("none", "box", "riemannian"):
            assert distance_lower_bound(grushin(), (0.0, 0.0), (1.0, 0.0), mode) <= 1.0 + 1e-9

    def test_projection_bound_uses_all_constant_coordinates(self):
        assert projection_bound(heisenberg(), np.zeros(3), np.array([0.3, 0.4, 2.0])) == pytest.approx(0.5)
        assert projection_bound(euclidean(3), np.zeros(3), np.array([1.0, 2.0, 2.0])) == pytest.approx(3.0)

    def test_riemannian_mode_is_exact_for_euclidean_space(self):
        assert distance_lower_bound(euclidean(2), (0.0, 0.0), (0.3, 0.4), "riemannian") == pytest.approx(0.5)

    def test_vertical_bound_stays_below_the_isoperimetric_distance(self):
        bound = distance_lower_bound(heisenberg(), (0.0, 0.0, 0.0), (0.0, 0.0, 0.5), "riemannian")
        assert 0.0 < bound <= np.sqrt(2.0 * np.pi)

    def test_lower_bound_above_the_certificate_is_a_breach(self, fast_distance, monkeypatch):
        monkeypatch.setattr("app.geometry.geodesy.distance_lower_bound", lambda *args: 10.0)
        with pytest.raises(InvariantBreach):
            cc_distance(euclidean(2), (0.0, 0.0), (1.0, 0.0), fast_distance)


class TestShooting:
    def test_grushin_axis(self, fast_shooting):
        lam0, length, converged = shoot(grushin(), (0.0, 0.0), (1.0, 0.0), fast_shooting)
        assert converged
        assert length == pytest.approx(1.0, abs=1e-6)

    def test_batch_handles_equal_points(self, fast_shooting):
        P = np.array([[0.0, 0.0], [0.5, 0.0]])
        batch = shoot_many(grushin(), P, P, fast_shooting)
        assert batch.converged.all()
        np.testing.assert_allclose(batch.lengths, 0.0)

    def test_vertical_covector_is_trivial_on_the_singular_line(self):
        with pytest.raises(ArgumentError):
            normal_geodesic(grushin(), (0.0, 0.0), (0.0, 1.0), T=0.5)

    @pytest.mark.slow
    def test_shooting_agrees_with_direct_method(self):
        S = grushin()
        _, length, converged = shoot(S, (0.0, 0.0), (0.0, 1.0), ShootingOptions())
        est = cc_distance(S, (0.0, 0.0), (0.0, 1.0))
        assert converged
        assert length == pytest.approx(est.upper, rel=5e-3)


class TestDistance:
    def test_equal_points(self):
        est = cc_distance(grushin(), (0.3, 0.2), (0.3, 0.2))
        assert est.upper == est.lower == 0.0

    def test_grushin_axis_distance(self, fast_distance):
        est = cc_distance(grushin(), (0.0, 0.0), (1.0, 0.0), fast_distance)
        assert est.converged
        assert est.upper == pytest.approx(1.0, abs=1e-4)
        assert 0.99 <= est.lower <= est.upper

    def test_euclidean_diagonal(self, fast_distance):
        est = cc_distance(euclidean(2), (0.0, 0.0), (1.0, 1.0), fast_distance)
        assert est.upper == pytest.approx(np.sqrt(2.0), abs=1e-6)

    def test_grushin_through_singular_line(self, fast_distance):
        est = cc_distance(grushin(), (1.0, 0.0), (-1.0, 0.0), fast_distance)
        assert est.upper <= 2.0 + 1e-4
        assert est.lower <= est.upper

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cc_distance(grushin(), (0.0, 0.0), (1.0, 0.0, 0.0))

    @pytest.mark.slow
    def test_heisenberg_vertical(self):
        # isoperimetric: a loop enclosing area z has length at least sqrt(4 pi z)
        est = cc_distance(heisenberg(), (0.0, 0.0, 0.0), (0.0, 0.0, 1.0))
        target = np.sqrt(4.0 * np.pi)
        assert target * (1 - 1e-6) <= est.upper <= target * 1.02

    def test_geodesic_is_constant_speed(self, fast_distance):
        S = euclidean(2)
        curve = geodesic_between(S, (0.0, 0.0), (1.0, 1.0), fast_distance)
        assert curve.duration == pytest.approx(1.0)
        speeds = curve.speeds
        np.testing.assert_allclose(speeds, speeds[0], rtol=1e-9)
        np.testing.assert_allclose(curve.end, (1.0, 1.0), atol=1e-7)

    def test_distance_matrix(self, fast_distance):
        table = distance_matrix(euclidean(2), [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)], fast_distance)
        assert list(table[["i", "j"]].itertuples(index=False, name=None)) == [(0, 1), (0, 2), (1, 2)]
        np.testing.assert_allclose(table["upper"], [1.0, np.sqrt(2.0), 1.0], atol=1e-6)
        assert (table["lower"] <= table["upper"] + 1e-12).all()


@pytest.mark.slow
class TestReferenceDistances:
    @staticmethod
    def pairs(rng, count):
        out = []
        for k in range(count):
            S = grushin() if k % 2 == 0 else heisenberg()
            out.append((S, rng.uniform(-0.5, 0.5, S.dim), rng.uniform(-0.5, 0.5, S.dim)))
        return out

    def test_grushin_vertical_golden(self):
        # the arch x = sqrt(2 / pi) sin(pi t) sweeps y from 0 to 1
        target = np.sqrt(2.0 * np.pi)
        _, length, converged = shoot(grushin(), (0.0, 0.0), (0.0, 1.0), ShootingOptions())
        assert converged
        assert length == pytest.approx(target, abs=1e-3)
        est = cc_distance(grushin(), (0.0, 0.0), (0.0, 1.0), DistanceOptions(segments=80))
        assert est.upper == pytest.approx(target, abs=1e-3)
        assert est.lower <= target

    def test_triangle_inequality(self, rng):
        opts = DistanceOptions(segments=32, restarts=4, seed=7)
        for k in range(50):
            S = grushin() if k % 2 == 0 else heisenberg()
            a, b, c = rng.uniform(-0.5, 0.5, (3, S.dim))
            table = distance_matrix(S, [a, b, c], opts)
            d_ab, d_ac, d_bc = table["upper"]
            assert d_ac <= d_ab + d_bc + 5e-3
            assert d_ab <= d_ac + d_bc + 5e-3
            assert d_bc <= d_ab + d_ac + 5e-3

    def test_shooting_agrees_with_direct_method_on_random_pairs(self, rng):
        for S, p, q in self.pairs(rng, 20):
            _, length, converged = shoot(S, p, q, ShootingOptions())
            est = cc_distance(S, p, q)
            assert converged
            assert abs(length - est.upper) <= 1e-2
