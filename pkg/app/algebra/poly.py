"""
Exact sparse polynomials over the rationals.

A polynomial is a dict mapping exponent tuples to Fraction coefficients:

    Poly     = Dict[Exponent, Fraction]
    Exponent = Tuple[int, ...]        (one entry per variable)

    x1^2 * x2 + 3   ->   {(2, 1): Fraction(1), (0, 0): Fraction(3)}

Zero coefficients are never stored, so dict equality is polynomial equality.
The zero polynomial is {}.
"""

import re
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple, Union

Exponent = Tuple[int, ...]
Poly = Dict[Exponent, Fraction]
Scalar = Union[int, Fraction]

_TERM_SEP = re.compile(r"\s+\+\s+")
_FACTOR = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def canonicalize(poly: Poly) -> Poly:
    """Drop zero coefficients."""
    return {mono: coeff for mono, coeff in poly.items() if coeff != 0}


def const(n_vars: int, value: Scalar) -> Poly:
    coeff = Fraction(value)
    return {(0,) * n_vars: coeff} if coeff != 0 else {}


def var(n_vars: int, idx: int) -> Poly:
    if not 0 <= idx < n_vars:
        raise ValueError(f"Invalid variable index {idx} for n_vars={n_vars}")
    exp = [0] * n_vars
    exp[idx] = 1
    return {tuple(exp): Fraction(1)}


def monomial(exponent: Sequence[int], coeff: Scalar = 1) -> Poly:
    c = Fraction(coeff)
    return {tuple(int(a) for a in exponent): c} if c != 0 else {}


def add(a: Poly, b: Poly) -> Poly:
    out: Poly = dict(a)
    for mono, coeff in b.items():
        out[mono] = out.get(mono, Fraction(0)) + coeff
    return canonicalize(out)


def sub(a: Poly, b: Poly) -> Poly:
    out: Poly = dict(a)
    for mono, coeff in b.items():
        out[mono] = out.get(mono, Fraction(0)) - coeff
    return canonicalize(out)


def scale(a: Poly, c: Scalar) -> Poly:
    c = Fraction(c)
    if c == 0:
        return {}
    return {mono: coeff * c for mono, coeff in a.items()}


def mul(a: Poly, b: Poly) -> Poly:
    """Distributive product of two polynomials."""
    if not a or not b:
        return {}
    out: Poly = {}
    for mono_a, coeff_a in a.items():
        for mono_b, coeff_b in b.items():
            mono = tuple(x + y for x, y in zip(mono_a, mono_b))
            out[mono] = out.get(mono, Fraction(0)) + coeff_a * coeff_b
    return canonicalize(out)


def derivative(a: Poly, idx: int) -> Poly:
    """Partial derivative with respect to x_idx."""
    out: Poly = {}
    for mono, coeff in a.items():
        power = mono[idx]
        if power == 0:
            continue
        lowered = list(mono)
        lowered[idx] = power - 1
        key = tuple(lowered)
        out[key] = out.get(key, Fraction(0)) + coeff * power
    return canonicalize(out)


def evaluate_exact(a: Poly, point: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for mono, coeff in a.items():
        term = coeff
        for x, power in zip(point, mono):
            if power:
                term *= x ** power
        total += term
    return total


def degree(a: Poly) -> int:
    return max((sum(mono) for mono in a), default=0)


def grlex_key(mono: Exponent) -> Tuple:
    """Graded lexicographic order: total degree first, then x1 before x2."""
    return (sum(mono), tuple(-e for e in mono))


def sorted_terms(a: Poly) -> List[Tuple[Exponent, Fraction]]:
    return sorted(a.items(), key=lambda item: grlex_key(item[0]))


# ============================================================================
# Text form
# ============================================================================

def format_poly(a: Poly) -> str:
    """
    Render as `coeff * x1^a1 x2^a2 + ...` in graded lexicographic order.

    Variables with exponent zero are omitted; a constant term is just `coeff`.
    """
    if not a:
        return "0"
    parts = []
    for mono, coeff in sorted_terms(a):
        factors = [f"x{i + 1}^{p}" for i, p in enumerate(mono) if p]
        if factors:
            parts.append(f"{coeff} * {' '.join(factors)}")
        else:
            parts.append(str(coeff))
    return " + ".join(parts)


def parse_poly(text: str, n_vars: int) -> Poly:
    """Inverse of format_poly; also accepts `x1` for `x1^1`."""
    text = text.strip()
    if not text or text == "0":
        return {}
    out: Poly = {}
    for term in _TERM_SEP.split(text):
        if "*" in term:
            coeff_text, factor_text = term.split("*", 1)
        elif term.lstrip("-").startswith("x"):
            sign = "-1" if term.startswith("-") else "1"
            coeff_text, factor_text = sign, term.lstrip("-")
        else:
            coeff_text, factor_text = term, ""
        try:
            coeff = Fraction(coeff_text.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"Bad coefficient in term {term!r}") from exc
        exp = [0] * n_vars
        for factor in factor_text.split():
            match = _FACTOR.match(factor)
            if match is None:
                raise ValueError(f"Bad factor {factor!r} in term {term!r}")
            idx = int(match.group(1)) - 1
            if not 0 <= idx < n_vars:
                raise ValueError(f"Variable x{idx + 1} out of range for dim {n_vars}")
            exp[idx] += int(match.group(2) or 1)
        key = tuple(exp)
        out[key] = out.get(key, Fraction(0)) + coeff
    return canonicalize(out)


def sum_polys(polys: Iterable[Poly]) -> Poly:
    out: Poly = {}
    for p in polys:
        out = add(out, p)
    return out
