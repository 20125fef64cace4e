import random
from fractions import Fraction

import numpy as np
import pytest

from app.algebra import poly as P
from app.algebra.compiled import CompiledFrame
from app.algebra.symfield import (
    PolyVectorField,
    WeightVector,
    bracket_levels,
    dilation_exponents,
    dilation_pushforward,
    evaluate,
    evaluate_exact,
    lie_bracket,
    weighted_split,
)
from app.errors import ArgumentError, DimensionError, NotPrivilegedError


def field(dim, *lines):
    return PolyVectorField.from_text(list(lines), dim)


def random_field(gen: random.Random, dim: int = 3, max_degree: int = 2) -> PolyVectorField:
    polys = []
    for _ in range(dim):
        poly = {}
        for _ in range(gen.randint(0, 3)):
            exp = [0] * dim
            for _ in range(gen.randint(0, max_degree)):
                exp[gen.randrange(dim)] += 1
            poly = P.add(poly, P.monomial(exp, gen.randint(-3, 3)))
        polys.append(poly)
    return PolyVectorField.from_polys(dim, polys)


DX = field(2, "1", "0")
X_DY = field(2, "0", "x1")


class TestBracket:
    def test_grushin_bracket(self):
        assert lie_bracket(DX, X_DY) == field(2, "0", "1")

    def test_self_bracket_vanishes(self):
        X = field(2, "1", "x1^2")
        assert lie_bracket(X, X).is_zero

    def test_heisenberg_bracket(self):
        X1 = field(3, "1", "0", "0")
        X2 = field(3, "0", "1", "x1")
        assert lie_bracket(X1, X2) == field(3, "0", "0", "1")

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            lie_bracket(DX, field(3, "1", "0", "0"))

    def test_identities_on_random_fields(self):
        gen = random.Random(2024)
        for _ in range(200):
            X, Y, Z = (random_field(gen) for _ in range(3))
            assert lie_bracket(X, Y) == -lie_bracket(Y, X)
            jacobi = (
                lie_bracket(X, lie_bracket(Y, Z))
                + lie_bracket(Y, lie_bracket(Z, X))
                + lie_bracket(Z, lie_bracket(X, Y))
            )
            assert jacobi.is_zero
            c = Fraction(gen.randint(-4, 4), gen.randint(1, 4))
            assert lie_bracket(X + c * Y, Z) == lie_bracket(X, Z) + c * lie_bracket(Y, Z)


class TestEvaluate:
    @pytest.mark.parametrize(
        "X, p, expected",
        [
            (X_DY, (2.0, 0.0), (0.0, 2.0)),
            (X_DY, (0.0, 5.0), (0.0, 0.0)),
            (field(2, "0", "x1 + x1^2"), (1.0, 0.0), (0.0, 2.0)),
        ],
    )
    def test_float(self, X, p, expected):
        np.testing.assert_allclose(evaluate(X, p), expected)

    def test_exact_at_rational_point(self):
        X = field(2, "1/3 * x1^2", "x1 x2")
        assert evaluate_exact(X, [Fraction(1, 2), 3]) == [Fraction(1, 12), Fraction(3, 2)]

    def test_wrong_point_length(self):
        with pytest.raises(DimensionError):
            evaluate(X_DY, (1.0, 2.0, 3.0))


class TestWeightedSplit:
    def test_perturbed_grushin(self):
        hat, rem = weighted_split(field(2, "0", "x1 + x1^2"), WeightVector((1, 2)))
        assert hat == X_DY
        assert rem == field(2, "0", "x1^2")

    def test_constant_field(self):
        hat, rem = weighted_split(DX, WeightVector((1, 2)))
        assert hat == DX
        assert rem.is_zero

    def test_martinet_is_homogeneous(self):
        X = field(3, "0", "1", "x1^2")
        hat, rem = weighted_split(X, WeightVector((1, 1, 3)))
        assert hat == X
        assert rem.is_zero

    def test_parts_sum_back(self):
        X = field(3, "x2 + x1^3", "1 + x3", "x1^2 + x1 x2^2")
        hat, rem = weighted_split(X, WeightVector((1, 1, 3)))
        assert hat + rem == X

    def test_not_privileged(self):
        with pytest.raises(NotPrivilegedError):
            weighted_split(field(2, "0", "1"), WeightVector((1, 2)))


class TestWeights:
    @pytest.mark.parametrize("weights", [(2, 2), (1, 3, 2), ()])
    def test_invalid(self, weights):
        with pytest.raises(ArgumentError):
            WeightVector(weights)

    def test_homogeneous_dimension(self):
        assert WeightVector((1, 1, 3)).homogeneous_dimension == 5


class TestDilations:
    def test_homogeneous_exponents(self):
        assert all(e == 1 for _, _, e in dilation_exponents(X_DY, WeightVector((1, 2))))

    def test_homogeneous_pushforward_scales(self):
        w = WeightVector((1, 2))
        assert dilation_pushforward(X_DY, w, 3) == X_DY.scale(3)

    def test_degree_zero_term_is_invariant(self):
        w = WeightVector((1, 2))
        pushed = dilation_pushforward(field(2, "0", "x1^2"), w, Fraction(1, 2))
        assert pushed == field(2, "0", "x1^2")

    def test_nonpositive_factor(self):
        with pytest.raises(ArgumentError):
            dilation_pushforward(X_DY, WeightVector((1, 2)), 0)


class TestTextForm:
    def test_round_trip(self):
        X = field(3, "1/2 * x1^2 x3 + -3", "0", "x2")
        assert PolyVectorField.from_text(X.to_text(), 3) == X

    def test_bad_factor(self):
        with pytest.raises(ValueError):
            P.parse_poly("2 * y1", 2)


class TestBracketLevels:
    def test_martinet_levels(self):
        X1 = field(3, "1", "0", "0")
        X2 = field(3, "0", "1", "x1^2")
        levels = bracket_levels([X1, X2], 3)
        second = field(3, "0", "0", "2 * x1")
        third = field(3, "0", "0", "2")
        assert len(levels[1]) == 1 and levels[1][0] in (second, -second)
        assert any(B in (third, -third) for B in levels[2])


class TestCompiledFrame:
    def test_values_match_evaluate(self, rng):
        fields = [field(2, "1", "0"), field(2, "0", "x1 + x1^2")]
        frame = CompiledFrame(fields)
        pts = rng.normal(size=(5, 2))
        F = frame.values(pts)
        assert F.shape == (5, 2, 2)
        for k, p in enumerate(pts):
            for i, X in enumerate(fields):
                np.testing.assert_allclose(F[k, :, i], evaluate(X, p))

    def test_jacobian_layout(self):
        frame = CompiledFrame([DX, X_DY])
        J = frame.jacobians(np.array([0.3, -1.0]))
        expected = np.zeros((2, 2, 2))
        expected[1, 0, 1] = 1.0
        np.testing.assert_allclose(J, expected)

    def test_empty_frame(self):
        with pytest.raises(DimensionError):
            CompiledFrame([])
