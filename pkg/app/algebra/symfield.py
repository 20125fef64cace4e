"""
Polynomial vector fields on R^n with exact rational coefficients.

A PolyVectorField X = sum_j X^j(x) d/dx_j stores each component X^j as a
sparse polynomial (see app.algebra.poly). Fields are immutable and hashable;
structural equality is mathematical equality.

Bracket convention: [X, Y] = DY.X - DX.Y, so [d/dx, x d/dy] = d/dy.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import islice
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from app.algebra import poly as P
from app.algebra.poly import Exponent, Poly
from app.errors import ArgumentError, DimensionError, NotPrivilegedError

Term = Tuple[Exponent, Fraction]


@dataclass(frozen=True)
class WeightVector:
    """Nondecreasing positive integer weights with w_1 = 1."""

    weights: Tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if not w or w[0] != 1:
            raise ArgumentError(f"Weights must start with 1, got {w}")
        if any(b < a for a, b in zip(w, w[1:])):
            raise ArgumentError(f"Weights must be nondecreasing, got {w}")

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def homogeneous_dimension(self) -> int:
        return sum(self.weights)


@dataclass(frozen=True)
class PolyVectorField:
    """
    Vector field with polynomial components.

    Usage:
        X = PolyVectorField.from_polys(2, [{}, P.var(2, 0)])   # x1 d/dx2
        Y = PolyVectorField.coordinate(2, 0)                    # d/dx1
        Z = lie_bracket(Y, X)                                   # d/dx2
    """

    dim: int
    components: Tuple[Tuple[Term, ...], ...]

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionError(f"Field dimension must be positive, got {self.dim}")
        if len(self.components) != self.dim:
            raise DimensionError(
                f"Expected {self.dim} components, got {len(self.components)}"
            )
        for comp in self.components:
            for mono, coeff in comp:
                if len(mono) != self.dim:
                    raise DimensionError(
                        f"Exponent {mono} does not match dimension {self.dim}"
                    )
                if coeff == 0:
                    raise ValueError("Zero coefficients are not stored")

    # ---- constructors -----------------------------------------------------

    @classmethod
    def from_polys(cls, dim: int, polys: Sequence[Poly]) -> "PolyVectorField":
        comps = tuple(tuple(P.sorted_terms(P.canonicalize(p))) for p in polys)
        return cls(dim, comps)

    @classmethod
    def zero(cls, dim: int) -> "PolyVectorField":
        return cls(dim, tuple(() for _ in range(dim)))

    @classmethod
    def coordinate(cls, dim: int, j: int) -> "PolyVectorField":
        """The constant field d/dx_j (0-based j)."""
        polys: List[Poly] = [{} for _ in range(dim)]
        polys[j] = P.const(dim, 1)
        return cls.from_polys(dim, polys)

    @classmethod
    def from_text(cls, lines: Sequence[str], dim: int) -> "PolyVectorField":
        if len(lines) != dim:
            raise DimensionError(f"Expected {dim} component lines, got {len(lines)}")
        return cls.from_polys(dim, [P.parse_poly(line, dim) for line in lines])

    # ---- access -------------------------------------------------------------

    def poly(self, j: int) -> Poly:
        return dict(self.components[j])

    def polys(self) -> List[Poly]:
        return [dict(c) for c in self.components]

    def terms(self) -> Iterator[Tuple[int, Exponent, Fraction]]:
        """Yield (component index, exponent, coefficient) triples."""
        for j, comp in enumerate(self.components):
            for mono, coeff in comp:
                yield j, mono, coeff

    @property
    def is_zero(self) -> bool:
        return all(not comp for comp in self.components)

    def to_text(self) -> List[str]:
        return [P.format_poly(dict(c)) for c in self.components]

    # ---- arithmetic ---------------------------------------------------------

    def _check(self, other: "PolyVectorField") -> None:
        if self.dim != other.dim:
            raise DimensionError(f"Dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        self._check(other)
        return PolyVectorField.from_polys(
            self.dim, [P.add(a, b) for a, b in zip(self.polys(), other.polys())]
        )

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        self._check(other)
        return PolyVectorField.from_polys(
            self.dim, [P.sub(a, b) for a, b in zip(self.polys(), other.polys())]
        )

    def __neg__(self) -> "PolyVectorField":
        return self.scale(-1)

    def scale(self, c) -> "PolyVectorField":
        return PolyVectorField.from_polys(self.dim, [P.scale(a, c) for a in self.polys()])

    def __rmul__(self, c) -> "PolyVectorField":
        return self.scale(c)

    def multiply_poly(self, f: Poly) -> "PolyVectorField":
        """The field f * X for a polynomial f."""
        return PolyVectorField.from_polys(self.dim, [P.mul(f, a) for a in self.polys()])

    def apply(self, f: Poly) -> Poly:
        """Directional derivative X(f) = sum_k X^k d f / dx_k."""
        out: Poly = {}
        for k, comp in enumerate(self.polys()):
            if comp:
                out = P.add(out, P.mul(comp, P.derivative(f, k)))
        return out

    def __str__(self) -> str:
        parts = []
        for j, text in enumerate(self.to_text()):
            if text != "0":
                parts.append(f"({text}) d{j + 1}")
        return " + ".join(parts) if parts else "0"


# ============================================================================
# Operations
# ============================================================================

def lie_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """[X, Y]^j = X(Y^j) - Y(X^j), computed exactly."""
    if X.dim != Y.dim:
        raise DimensionError(f"Cannot bracket fields of dims {X.dim} and {Y.dim}")
    comps = [P.sub(X.apply(yj), Y.apply(xj)) for xj, yj in zip(X.polys(), Y.polys())]
    return PolyVectorField.from_polys(X.dim, comps)


def evaluate(X: PolyVectorField, p: Sequence[float]) -> np.ndarray:
    """Float evaluation of all components at p."""
    if len(p) != X.dim:
        raise DimensionError(f"Point of length {len(p)} for field of dim {X.dim}")
    x = np.asarray(p, dtype=float)
    out = np.zeros(X.dim)
    for j, mono, coeff in X.terms():
        out[j] += float(coeff) * float(np.prod(x ** np.asarray(mono)))
    return out


def evaluate_exact(X: PolyVectorField, p: Sequence) -> List[Fraction]:
    if len(p) != X.dim:
        raise DimensionError(f"Point of length {len(p)} for field of dim {X.dim}")
    point = [Fraction(v) for v in p]
    return [P.evaluate_exact(comp, point) for comp in X.polys()]


def weighted_degree(mono: Exponent, j: int, w: WeightVector) -> int:
    """Weighted degree <a, w> - w_j of the monomial x^a d/dx_j."""
    return sum(a * wi for a, wi in zip(mono, w.weights)) - w.weights[j]


def weighted_split(
    X: PolyVectorField, w: WeightVector
) -> Tuple[PolyVectorField, PolyVectorField]:
    """
    Split X = X_hat + R by weighted degree.

    X_hat collects the terms of weighted degree -1, R everything else.

    Raises:
        NotPrivilegedError: if some term has weighted degree below -1.
    """
    if len(w) != X.dim:
        raise DimensionError(f"{len(w)} weights for a field of dim {X.dim}")
    hom: List[Poly] = [{} for _ in range(X.dim)]
    rem: List[Poly] = [{} for _ in range(X.dim)]
    for j, mono, coeff in X.terms():
        deg = weighted_degree(mono, j, w)
        if deg < -1:
            raise NotPrivilegedError(
                f"Term {coeff} * x^{mono} d{j + 1} has weighted degree {deg} < -1"
            )
        target = hom if deg == -1 else rem
        target[j][mono] = coeff
    return PolyVectorField.from_polys(X.dim, hom), PolyVectorField.from_polys(X.dim, rem)


def dilation_exponents(X: PolyVectorField, w: WeightVector) -> List[Tuple[int, Exponent, int]]:
    """
    Exponent e of lambda for each term under (delta_lambda)_*.

    The term c x^a d/dx_j becomes c lambda^e x^a d/dx_j with e = w_j - <a, w>,
    i.e. minus the weighted degree. Homogeneous fields have e = 1 throughout.
    """
    return [(j, mono, -weighted_degree(mono, j, w)) for j, mono, _ in X.terms()]


def dilation_pushforward(X: PolyVectorField, w: WeightVector, lam) -> PolyVectorField:
    """Exact pushforward (delta_lambda)_* X for a rational lambda > 0."""
    lam = Fraction(lam)
    if lam <= 0:
        raise ArgumentError(f"Dilation factor must be positive, got {lam}")
    polys: List[Poly] = [{} for _ in range(X.dim)]
    for j, mono, coeff in X.terms():
        polys[j][mono] = coeff * lam ** (-weighted_degree(mono, j, w))
    return PolyVectorField.from_polys(X.dim, polys)


def iter_bracket_levels(generators: Sequence[PolyVectorField]) -> Iterator[List[PolyVectorField]]:
    """
    Yield right-normed iterated brackets grouped by length.

    Level 1 is the generators, level i holds [X_j, B] for B at level i-1.
    Zero brackets and exact duplicates (up to sign) are dropped; spans are
    unaffected.
    """
    level = list(generators)
    seen = set(level)
    while True:
        yield level
        nxt: List[PolyVectorField] = []
        for B in level:
            for X in generators:
                Z = lie_bracket(X, B)
                if Z.is_zero or Z in seen or -Z in seen:
                    continue
                seen.add(Z)
                nxt.append(Z)
        level = nxt


def bracket_levels(
    generators: Sequence[PolyVectorField], depth: int
) -> List[List[PolyVectorField]]:
    return list(islice(iter_bracket_levels(generators), depth))
