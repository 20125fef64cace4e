import numpy as np
import pytest

from app.algebra.symfield import PolyVectorField, WeightVector
from app.errors import ArgumentError, NotHorizontal, NotPrivilegedError, WindowError
from app.geometry.curves import constant_curve
from app.geometry.geodesy import cc_distance, normal_geodesic
from app.geometry.library import euclidean, grushin, martinet, perturbed_grushin
from app.geometry.nilpotent import (
    DilationFamily,
    angle_estimate_check,
    ball_box_constants,
    blow_up_convergence,
    blow_up_line_check,
    blow_up_normal,
    dilate,
    dilation_line_identity_check,
    nilpotent_approximation,
    pseudo_norm,
    rescaled_distance,
    rescaled_distance_table,
    rescaled_structure,
)
from app.geometry.structure import SubRiemannianStructure

W_GRUSHIN = WeightVector((1, 2))
W_MARTINET = WeightVector((1, 1, 3))


class TestDilations:
    def test_dilate(self):
        np.testing.assert_allclose(dilate(W_GRUSHIN, 2.0, (1.0, 1.0)), (2.0, 4.0))

    def test_identity(self):
        np.testing.assert_allclose(dilate(W_MARTINET, 1.0, (0.3, -2.0, 5.0)), (0.3, -2.0, 5.0))

    def test_pseudo_norm_is_homogeneous(self, rng):
        x = rng.normal(size=(6, 3))
        np.testing.assert_allclose(
            pseudo_norm(W_MARTINET, dilate(W_MARTINET, 3.0, x)), 3.0 * pseudo_norm(W_MARTINET, x)
        )

    def test_nonpositive_lambda(self):
        with pytest.raises(ArgumentError):
            DilationFamily(W_GRUSHIN)(0.0, (1.0, 1.0))


class TestNilpotentApproximation:
    def test_grushin_is_homogeneous(self):
        assert nilpotent_approximation(grushin(), W_GRUSHIN).generators == grushin().generators

    def test_perturbed_grushin_truncates(self):
        assert nilpotent_approximation(perturbed_grushin(), W_GRUSHIN).generators == grushin().generators

    def test_martinet_is_homogeneous(self):
        assert nilpotent_approximation(martinet(), W_MARTINET).generators == martinet().generators

    def test_not_privileged(self):
        X1 = PolyVectorField.from_text(["1", "0"], 2)
        X2 = PolyVectorField.from_text(["0", "1"], 2)
        S = SubRiemannianStructure(2, (X1, X2), "euclidean_misweighted")
        with pytest.raises(NotPrivilegedError):
            nilpotent_approximation(S, W_GRUSHIN)

    def test_rescaled_structure_tends_to_approximation(self):
        hat = nilpotent_approximation(perturbed_grushin(), W_GRUSHIN)
        for lam in (1, 10, 1000):
            S_lam = rescaled_structure(perturbed_grushin(), W_GRUSHIN, lam)
            diff = S_lam.generators[1] - hat.generators[1]
            assert diff == PolyVectorField.from_text(["0", f"1/{lam} * x1^2"], 2)

    def test_rescaled_distance_at_unit_lambda(self, fast_distance):
        S = perturbed_grushin()
        p, q = (0.0, 0.0), (0.5, 0.0)
        plain = cc_distance(S, p, q, fast_distance).upper
        assert rescaled_distance(S, W_GRUSHIN, 1.0, p, q, fast_distance) == pytest.approx(plain, abs=1e-9)

    def test_rescaled_distance_methods_agree(self, fast_distance):
        S = perturbed_grushin()
        x, y = (0.0, 0.0), (1.0, 0.0)
        a = rescaled_distance(S, W_GRUSHIN, 4.0, x, y, fast_distance, method="structure")
        b = rescaled_distance(S, W_GRUSHIN, 4.0, x, y, fast_distance, method="scaled")
        assert a == pytest.approx(1.0, abs=1e-4)
        assert b == pytest.approx(1.0, abs=1e-4)

    def test_unknown_method(self, fast_distance):
        with pytest.raises(ArgumentError):
            rescaled_distance(grushin(), W_GRUSHIN, 2.0, (0.0, 0.0), (1.0, 0.0), fast_distance, method="other")

    def test_rescaled_distance_table(self, fast_distance):
        S = perturbed_grushin()
        table = rescaled_distance_table(S, W_GRUSHIN, (1.0, 2.0), (0.0, 0.0), (1.0, 0.0), fast_distance)
        assert list(table.columns) == ["lambda", "d_lambda", "d_hat", "deviation"]
        assert table["deviation"].max() <= 1e-4

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "x, y",
        [
            ((0.0, 0.0), (0.0, 0.25)),
            ((0.0, 0.0), (0.5, 0.1)),
            ((0.2, 0.0), (0.2, 0.2)),
            ((0.0, -0.1), (0.3, 0.15)),
            ((0.1, 0.1), (0.4, -0.05)),
        ],
    )
    def test_rescaled_distances_approach_the_nilpotent_distance(self, x, y, fast_distance):
        # with x >= 0 at both ends the x^2 / lam term only speeds y up, so d_lam grows with lam
        lambdas = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
        table = rescaled_distance_table(perturbed_grushin(), W_GRUSHIN, lambdas, x, y, fast_distance)
        deviations = table["deviation"].to_numpy()
        assert np.all(np.diff(deviations) <= 1e-4)
        assert deviations[-1] <= 2e-2


class TestBlowUps:
    def test_grushin_horizontal_line(self):
        line = blow_up_normal(grushin(), W_GRUSHIN, (1.0, 0.0), T=1.0)
        np.testing.assert_allclose(line.state_at(0.5), (0.5, 0.0), atol=1e-12)

    def test_grushin_backward_line(self):
        line = blow_up_normal(grushin(), W_GRUSHIN, (-1.0, 0.0), T=1.0)
        np.testing.assert_allclose(line.end, (-1.0, 0.0), atol=1e-12)

    def test_two_sided_line(self):
        line = blow_up_normal(grushin(), W_GRUSHIN, (1.0, 0.0), T=1.0, two_sided=True)
        np.testing.assert_allclose(line.start, (-1.0, 0.0), atol=1e-12)
        np.testing.assert_allclose(line.end, (1.0, 0.0), atol=1e-12)

    def test_martinet_vertical_line(self):
        line = blow_up_normal(martinet(), W_MARTINET, (0.0, 1.0, 0.0), T=2.0)
        np.testing.assert_allclose(line.end, (0.0, 2.0, 0.0), atol=1e-12)

    def test_direction_must_be_horizontal(self):
        with pytest.raises(NotHorizontal):
            blow_up_normal(grushin(), W_GRUSHIN, (0.0, 1.0))

    def test_constant_curve_has_zero_deviation(self):
        gamma = constant_curve((0.0, 0.0), 2, duration=1.0)
        report = blow_up_convergence(grushin(), W_GRUSHIN, gamma, [1.0, 2.0, 4.0], window=1.0, candidate=gamma)
        assert report.deviations == (0.0, 0.0, 0.0)
        assert report.converged

    def test_perturbed_geodesic_converges_to_line(self):
        S = perturbed_grushin()
        lambdas = [1.0, 4.0, 16.0, 64.0]
        gamma = normal_geodesic(S, (0.0, 0.0), (1.0, 0.0), T=1.0)
        line = blow_up_normal(S, W_GRUSHIN, (1.0, 0.0), T=1.0)
        report = blow_up_convergence(S, W_GRUSHIN, gamma, lambdas, 1.0, line, tol=1e-6)
        assert report.mode == "candidate"
        assert report.converged
        assert list(report.to_frame().columns) == ["lambda", "sup_deviation", "verdict"]

    def test_cauchy_mode(self):
        gamma = normal_geodesic(grushin(), (0.0, 0.0), (1.0, 0.0), T=1.0)
        report = blow_up_convergence(grushin(), W_GRUSHIN, gamma, [1.0, 2.0, 4.0])
        assert report.mode == "cauchy"
        assert report.lambdas == (2.0, 4.0)

    def test_window_too_long(self):
        gamma = normal_geodesic(grushin(), (0.0, 0.0), (1.0, 0.0), T=0.5)
        with pytest.raises(WindowError):
            blow_up_convergence(grushin(), W_GRUSHIN, gamma, [1.0, 2.0], window=1.0)

    def test_schedule_must_increase(self):
        gamma = normal_geodesic(grushin(), (0.0, 0.0), (1.0, 0.0), T=1.0)
        with pytest.raises(ArgumentError):
            blow_up_convergence(grushin(), W_GRUSHIN, gamma, [2.0, 1.0])

    @pytest.mark.parametrize(
        "S, w, v",
        [
            (grushin(), W_GRUSHIN, (1.0, 0.0)),
            (martinet(), W_MARTINET, (1.0, 0.0, 0.0)),
            (martinet(), W_MARTINET, (np.sqrt(0.5), np.sqrt(0.5), 0.0)),
        ],
    )
    def test_dilation_line_identity(self, S, w, v):
        assert dilation_line_identity_check(nilpotent_approximation(S, w), w, v, tol=1e-8)

    def test_blown_up_line_is_minimizing(self, fast_distance):
        d, passed = blow_up_line_check(grushin(), W_GRUSHIN, (1.0, 0.0), 0.5, fast_distance)
        assert passed
        assert d == pytest.approx(1.0, abs=1e-4)


class TestNilpotentGeometry:
    def test_angle_estimate_on_the_plane(self, fast_distance):
        table = angle_estimate_check(
            euclidean(2), WeightVector((1, 1)), (np.pi / 2, np.pi / 3), (0.5,), fast_distance
        )
        assert len(table) == 4
        assert table["passed"].all()
        np.testing.assert_allclose(table["upper"], table["target"], atol=1e-5)
        np.testing.assert_allclose(table["lower"], table["target"], atol=1e-5)

    def test_angle_estimate_fails_when_the_lower_bound_falls_short(self, fast_distance):
        X1 = PolyVectorField.coordinate(2, 0)
        X2 = PolyVectorField.from_text(["0", "1 + 1 * x1^1"], 2)
        S = SubRiemannianStructure(2, (X1, X2), "sheared_plane")
        table = angle_estimate_check(S, WeightVector((1, 1)), (np.pi / 2,), (0.5,), fast_distance)
        assert (table["passed"] == (table["lower"] >= table["target"] - 1e-3)).all()
        # y moves faster for x > 0, so the pair on that side is closer than the flat estimate
        short = table[table["upper"] < table["target"] - 1e-3]
        assert len(short) > 0
        assert not short["passed"].any()

    def test_angle_estimate_needs_two_directions(self, fast_distance):
        with pytest.raises(ArgumentError):
            angle_estimate_check(grushin(), W_GRUSHIN, opts=fast_distance)

    @pytest.mark.slow
    def test_ball_box_constants(self):
        # unit pseudo-sphere points (0, 1), (1/2, 1/4), (1, 0); the middle one is reached by the
        # arch x = (L / eta) sin(eta t) with 2 eta - sin 2 eta = 4 sin^2 eta
        constants = ball_box_constants(grushin(), W_GRUSHIN, count=3)
        np.testing.assert_allclose(pseudo_norm(W_GRUSHIN, constants.points), 1.0)
        np.testing.assert_allclose(constants.ratios, [np.sqrt(2.0 * np.pi), 0.89205, 1.0], atol=2e-3)
        assert constants.c1 == pytest.approx(0.89205, abs=2e-3)
        assert constants.c2 == pytest.approx(np.sqrt(2.0 * np.pi), abs=2e-3)
