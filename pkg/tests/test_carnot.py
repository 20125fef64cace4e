import numpy as np
import pytest

from app.errors import ArgumentError, LiftBaseError
from app.geometry.carnot import (
    HeisenbergElement,
    constant_control_descent,
    dilation_commute_check,
    group_dilate,
    horizontal_lift,
    inverse,
    lift_line,
    preimage,
    project,
    pushforward_check,
    random_elements,
)
from app.geometry.curves import constant_curve
from app.geometry.geodesy import integrate_control
from app.geometry.library import grushin

E1 = HeisenbergElement(1.0, 0.0, 0.0)
E2 = HeisenbergElement(0.0, 1.0, 0.0)


class TestGroup:
    def test_product(self):
        assert E1 * E2 == HeisenbergElement(1.0, 1.0, 0.5)
        assert E2 * E1 == HeisenbergElement(1.0, 1.0, -0.5)

    def test_inverse(self, rng):
        for g in random_elements(10, rng):
            np.testing.assert_allclose((g * inverse(g)).as_array(), 0.0, atol=1e-15)

    def test_associative(self, rng):
        a, b, c = random_elements(3, rng)
        np.testing.assert_allclose(((a * b) * c).as_array(), (a * (b * c)).as_array(), atol=1e-12)

    def test_dilation_is_a_homomorphism(self, rng):
        a, b = random_elements(2, rng)
        np.testing.assert_allclose(
            group_dilate(a * b, 3.0).as_array(), (group_dilate(a, 3.0) * group_dilate(b, 3.0)).as_array()
        )

    def test_dilation_factor(self):
        with pytest.raises(ArgumentError):
            group_dilate(E1, -1.0)


class TestProjection:
    def test_identity(self):
        np.testing.assert_allclose(project(HeisenbergElement.identity()), (0.0, 0.0))

    def test_preimage(self, rng):
        for x in rng.normal(size=(5, 2)):
            np.testing.assert_allclose(project(preimage(x)), x)

    def test_pushforward_left_convention(self, rng):
        report = pushforward_check([HeisenbergElement.identity(), E2] + random_elements(50, rng))
        assert report.convention == "left"
        assert report.passed
        assert report.deviations["right"] > 1e-3

    def test_dilations_commute(self, rng):
        report = dilation_commute_check(random_elements(50, rng), (0.5, 2.0, 10.0))
        assert report.passed

    def test_dilation_of_exp_x1(self):
        np.testing.assert_allclose(project(group_dilate(E1, 2.0)), (-2.0, 0.0))


class TestLift:
    def test_axis_line(self):
        base, lift = lift_line((1.0, 0.0))
        np.testing.assert_allclose(lift.projection(), base.states, atol=1e-12)
        np.testing.assert_allclose(lift.controls, np.tile((1.0, 0.0), (len(lift.times), 1)))
        assert lift.length == pytest.approx(base.length)

    def test_constant_curve(self):
        gamma = constant_curve((0.0, 0.0), 2)
        lift = horizontal_lift(gamma)
        np.testing.assert_allclose(lift.elements, 0.0)

    def test_two_segment_curve(self):
        gamma = integrate_control(grushin(), (0.0, 0.0), [(1.0, 0.0), (0.5, 1.0)], T=2.0)
        lift = horizontal_lift(gamma)
        assert np.max(np.abs(lift.projection() - gamma.states)) <= 1e-5

    def test_lift_from_offset_base(self):
        gamma = integrate_control(grushin(), (0.5, 0.25), [(0.3, 1.0)])
        lift = horizontal_lift(gamma, preimage((0.5, 0.25)))
        assert np.max(np.abs(lift.projection() - gamma.states)) <= 1e-5

    def test_wrong_base(self):
        gamma = integrate_control(grushin(), (0.5, 0.0), [(1.0, 0.0)])
        with pytest.raises(LiftBaseError):
            horizontal_lift(gamma)

    def test_descent(self):
        _, lift = lift_line((1.0, 0.5))
        descended = constant_control_descent(lift)
        np.testing.assert_allclose(descended.end, lift.projection()[-1])

    def test_frame_columns(self):
        _, lift = lift_line((1.0, 0.5), steps=10)
        assert list(lift.to_frame().columns) == ["t", "a", "b", "c", "u1", "u2"]
