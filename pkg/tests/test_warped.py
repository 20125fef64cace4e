import numpy as np
import pytest

from app.errors import ArgumentError, DimensionError, GateFailed
from app.warped.cone_grushin import (
    ConeGrushinSpace,
    ConePath,
    axis_scaling_fit,
    cone_dilate,
    cone_grushin_distance,
    dilation_isometry_check,
    full_model_distance,
    hausdorff_dimension_estimate,
    horizontal_distribution_check,
    reduce_pair,
)
from app.warped.curvature import (
    curvature_oracle,
    euclidean_metric,
    oracle_components,
    round_sphere_metric,
)
from app.warped.warping import (
    WarpingTriple,
    asymptotic_warping_limit,
    axis_constant,
    minimal_sphere_dimension,
    parameter_gate,
    rescaled_warping,
    ricci_components,
    ricci_sweep,
)

TRIPLE = WarpingTriple(11, 2, 1.0, 0.5)


class TestWarping:
    @pytest.mark.parametrize("k, alpha, m", [(2, 1.0, 11), (3, 2.0, 28), (2, 0.5, 6)])
    def test_minimal_sphere_dimension(self, k, alpha, m):
        assert minimal_sphere_dimension(k, alpha) == m

    def test_gate(self):
        result = parameter_gate(2, 1.0)
        assert result.m == 11
        assert result.positive
        assert 0 < result.c <= 0.5

    def test_gate_bisects_to_the_positivity_edge(self, monkeypatch):
        monkeypatch.setattr(
            "app.warped.warping.ricci_components", lambda W, r: [np.full(len(r), 0.3 - W.c)] * 4
        )
        result = parameter_gate(2, 1.0)
        assert result.c <= 0.3
        assert result.c == pytest.approx(0.3, rel=2e-6)
        assert all(v >= 1e-8 for v in result.minima.values())
        assert result.iterations <= 60

    def test_gate_fails_without_positive_c(self, monkeypatch):
        monkeypatch.setattr("app.warped.warping.ricci_components", lambda W, r: [np.full(len(r), -1.0)] * 4)
        with pytest.raises(GateFailed):
            parameter_gate(2, 1.0)

    def test_warping_ratios_at_unit_radius(self):
        assert float(TRIPLE.ratio(["f2"], ["f"], 1.0)) == pytest.approx(-7.0 / 16.0)
        assert float(TRIPLE.ratio(["f1", "h1"], ["f", "h"], 1.0)) == pytest.approx(-3.0 / 8.0)

    def test_components_need_positive_radius(self):
        with pytest.raises(ArgumentError):
            ricci_components(TRIPLE, [0.0, 1.0])

    def test_sweep_columns(self):
        table = ricci_sweep(TRIPLE, np.array([0.5, 1.0, 2.0]))
        assert list(table.columns) == ["r", "ric_rr", "ric_xx", "ric_yy", "ric_zz"]
        assert len(table) == 3

    @pytest.mark.parametrize("m, k, alpha, c", [(1, 2, 1.0, 0.5), (11, 2, 0.0, 0.5), (11, 2, 1.0, 1.0)])
    def test_invalid_triple(self, m, k, alpha, c):
        with pytest.raises(ArgumentError):
            WarpingTriple(m, k, alpha, c)

    def test_axis_constant(self):
        assert axis_constant(1.0) == pytest.approx(np.sqrt(2.0 * np.pi))
        assert axis_constant(3.0) == pytest.approx(2.751, abs=1e-3)

    def test_rescaled_warping(self):
        r = np.array([0.5, 1.0, 2.0])
        unit = rescaled_warping(TRIPLE, 1.0)
        for name in ("f", "g", "h"):
            np.testing.assert_allclose(unit[name](r), TRIPLE.evaluate(name, r), rtol=1e-12)
        far = rescaled_warping(TRIPLE, 1e4)
        assert float(far["g"](2.0)) == pytest.approx(TRIPLE.c * 2.0, rel=1e-3)
        assert float(far["h"](2.0)) == pytest.approx(0.5, rel=1e-3)
        assert float(far["f"](2.0)) <= np.sqrt(2.0 / 1e4)
        with pytest.raises(ArgumentError):
            rescaled_warping(TRIPLE, 0.0)

    def test_warping_limit(self):
        report = asymptotic_warping_limit(TRIPLE)
        assert report.decreasing
        assert report.passed


class TestCurvatureOracle:
    def test_flat(self):
        ric = curvature_oracle(euclidean_metric(3), np.array([0.2, -0.4, 1.0]))
        assert np.max(np.abs(ric)) <= 1e-6

    def test_round_sphere(self):
        p = np.array([np.pi / 3, 0.4])
        metric = round_sphere_metric(2)
        np.testing.assert_allclose(curvature_oracle(metric, p), metric(p), atol=1e-5)

    def test_matches_closed_form(self):
        oracle = oracle_components(TRIPLE, 1.0)
        closed = dict(zip(oracle, (float(v) for v in ricci_components(TRIPLE, 1.0))))
        for name in oracle:
            assert oracle[name] == pytest.approx(closed[name], rel=1e-4, abs=1e-5)


class TestConeGrushin:
    SPACE = ConeGrushinSpace(2, 1.0)

    @pytest.mark.parametrize("k, alpha, c", [(1, 1.0, 0.5), (2, 0.0, 0.5), (2, 1.0, 1.5)])
    def test_invalid_space(self, k, alpha, c):
        with pytest.raises(ArgumentError):
            ConeGrushinSpace(k, alpha, c)

    def test_point_shape(self):
        with pytest.raises(DimensionError):
            self.SPACE.point((0.0, 0.0, 0.0))

    def test_dilate(self):
        np.testing.assert_allclose(cone_dilate(self.SPACE, 2.0, (1.0, 1.0, 1.0, 1.0)), (2.0, 2.0, 2.0, 4.0))

    def test_reduce_pair_angle(self):
        pair = reduce_pair(self.SPACE, (1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0))
        assert pair.dpsi == pytest.approx(0.5 * np.pi / 2.0)
        assert pair.r0 == pair.r1 == 1.0

    def test_equal_points(self, fast_cone):
        p = (0.3, 0.1, 0.0, 2.0)
        assert cone_grushin_distance(self.SPACE, p, p, fast_cone).value == 0.0

    def test_radial_pair(self, fast_cone):
        est = cone_grushin_distance(self.SPACE, (0.5, 0.0, 0.0, 0.0), (1.5, 0.0, 0.0, 0.0), fast_cone)
        assert est.upper == pytest.approx(1.0, abs=1e-4)
        assert est.value == pytest.approx(1.0, abs=1e-4)
        assert est.verdict == "avoids"

    @pytest.mark.parametrize("alpha, slope, tol", [(1.0, 2.0, 0.1), (3.0, 4.0, 0.2)])
    def test_hausdorff_dimension(self, alpha, slope, tol):
        fit = hausdorff_dimension_estimate(ConeGrushinSpace(2, alpha))
        assert fit.slope == pytest.approx(slope, abs=tol)
        assert fit.expected == 1.0 + alpha

    def test_horizontal_distribution(self):
        path = ConePath.straight(self.SPACE, (1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.5))
        report = horizontal_distribution_check(self.SPACE, [path])
        assert report.passed
        assert report.growth == (3, 3, 4)

    @pytest.mark.slow
    def test_axis_scaling(self):
        fit = axis_scaling_fit(self.SPACE)
        assert fit.slope == pytest.approx(0.5, abs=0.05)

    @pytest.mark.slow
    def test_dilation_isometry(self, fast_cone):
        pairs = [(np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0, 0.3]))]
        report = dilation_isometry_check(self.SPACE, pairs, (2.0,), fast_cone)
        assert report.passed

    @pytest.mark.slow
    def test_symmetry_reduction(self):
        p, q = (1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.3)
        reduced = cone_grushin_distance(self.SPACE, p, q).value
        assert full_model_distance(self.SPACE, p, q) == pytest.approx(reduced, rel=5e-2)
