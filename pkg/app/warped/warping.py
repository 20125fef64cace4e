"""
Triply-warped metrics dr^2 + f^2 ds_m^2 + g^2 ds_k^2 + h^2 ds_1^2 with

    f(r) = r / (1 + r^2)^(1/4)
    g(r) = (pi / 2) c r / arctan(r)
    h(r) = (1 + r^2)^(-alpha / 2)

Ricci components in unit directions are built symbolically with sympy and
lambdified to numpy once per triple.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
import pandas as pd
import sympy as sp
from scipy.special import beta

from app.config.settings import WarpedOptions
from app.errors import ArgumentError, GateFailed

logger = logging.getLogger(__name__)

COMPONENTS = ("ric_rr", "ric_xx", "ric_yy", "ric_zz")

_r = sp.Symbol("r", positive=True)


@dataclass(frozen=True)
class WarpingTriple:
    """
    Attributes:
        m: dimension of the first sphere factor
        k: dimension of the second sphere factor
        alpha: decay exponent of h
        c: asymptotic slope of g, in (0, 1)
    """

    m: int
    k: int
    alpha: float
    c: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2 or int(self.k) != self.k or self.k < 2:
            raise ArgumentError(f"Sphere dimensions must be integers >= 2, got m={self.m}, k={self.k}")
        if not self.alpha > 0:
            raise ArgumentError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.c < 1:
            raise ArgumentError(f"c must lie in (0, 1), got {self.c}")

    # ---- symbolic ----------------------------------------------------------

    @cached_property
    def symbols(self) -> Dict[str, sp.Expr]:
        r = _r
        alpha = sp.nsimplify(self.alpha)
        c = sp.nsimplify(self.c)
        f = r / (1 + r**2) ** sp.Rational(1, 4)
        g = sp.pi / 2 * c * r / sp.atan(r)
        h = (1 + r**2) ** (-alpha / 2)
        out = {"f": f, "g": g, "h": h}
        for name, expr in list(out.items()):
            out[f"{name}1"] = sp.diff(expr, r)
            out[f"{name}2"] = sp.diff(expr, r, 2)
        return out

    @cached_property
    def component_exprs(self) -> Dict[str, sp.Expr]:
        s = self.symbols
        f, f1, f2 = s["f"], s["f1"], s["f2"]
        g, g1, g2 = s["g"], s["g1"], s["g2"]
        h, h1, h2 = s["h"], s["h1"], s["h2"]
        m, k = self.m, self.k
        return {
            "ric_rr": -m * f2 / f - k * g2 / g - h2 / h,
            "ric_xx": -f2 / f + (m - 1) * (1 - f1**2) / f**2 - k * f1 * g1 / (f * g) - f1 * h1 / (f * h),
            "ric_yy": -g2 / g - m * f1 * g1 / (f * g) + (k - 1) * (1 - g1**2) / g**2 - g1 * h1 / (g * h),
            "ric_zz": -h2 / h - m * f1 * h1 / (f * h) - k * g1 * h1 / (g * h),
        }

    @cached_property
    def _numeric(self) -> Dict[str, Callable]:
        exprs = dict(self.symbols)
        exprs.update(self.component_exprs)
        return {name: sp.lambdify(_r, expr, "numpy") for name, expr in exprs.items()}

    def evaluate(self, name: str, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.broadcast_to(self._numeric[name](r), r.shape).astype(float)

    def ratio(self, numerator: Sequence[str], denominator: Sequence[str], r) -> np.ndarray:
        """Products of f, g, h and derivatives, e.g. ratio(["f1", "h1"], ["f", "h"], r)."""
        out = np.ones_like(np.asarray(r, dtype=float))
        for name in numerator:
            out = out * self.evaluate(name, r)
        for name in denominator:
            out = out / self.evaluate(name, r)
        return out

    def with_c(self, c: float) -> "WarpingTriple":
        return WarpingTriple(self.m, self.k, self.alpha, c)


def ricci_components(W: WarpingTriple, r) -> Tuple[np.ndarray, ...]:
    """
    (Ric(d_r, d_r), Ric(X, X), Ric(Y, Y), Ric(Z, Z)) for unit X, Y, Z tangent
    to S^m, S^k and the circle.

    Raises:
        ArgumentError: if some r <= 0
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ArgumentError("Ricci components are evaluated at r > 0 only")
    return tuple(W.evaluate(name, r) for name in COMPONENTS)


# ============================================================================
# Parameter gate
# ============================================================================

@dataclass(frozen=True)
class GateResult:
    """m, c and the grid minima of the four components at that c."""

    m: int
    c: float
    minima: Dict[str, float]
    iterations: int
    r_grid: Tuple[float, float, int]

    @property
    def positive(self) -> bool:
        return all(v > 0 for v in self.minima.values())


def minimal_sphere_dimension(k: int, alpha: float) -> int:
    """Least integer m > max(k + 4 alpha (alpha + 1), k + 1, 2 (alpha + 1))."""
    return int(math.floor(max(k + 4 * alpha * (alpha + 1), k + 1, 2 * (alpha + 1)))) + 1


def ricci_sweep(W: WarpingTriple, r: np.ndarray) -> pd.DataFrame:
    table = pd.DataFrame({"r": r})
    for name, values in zip(COMPONENTS, ricci_components(W, r)):
        table[name] = values
    return table


def parameter_gate(k: int, alpha: float, opts: WarpedOptions = WarpedOptions()) -> GateResult:
    """
    Smallest admissible m, then the largest c <= opts.c_start found by
    bisection for which every component exceeds opts.gate_margin on a log
    grid of r.

    c is halved from opts.c_start until it passes; the passing value and
    the failing value above it are then bisected to relative width 1e-6.
    Halvings and bisection steps share opts.gate_max_iter.

    Raises:
        GateFailed: if no c passes within opts.gate_max_iter halvings
    """
    if int(k) != k or k < 2:
        raise ArgumentError(f"k must be an integer >= 2, got {k}")
    if not alpha > 0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    m = minimal_sphere_dimension(k, alpha)
    r = np.logspace(np.log10(opts.gate_r_min), np.log10(opts.gate_r_max), opts.gate_points)

    def grid_minima(c: float) -> Dict[str, float]:
        W = WarpingTriple(m, k, alpha, c)
        return {name: float(np.min(v)) for name, v in zip(COMPONENTS, ricci_components(W, r))}

    def passes(minima: Dict[str, float]) -> bool:
        return all(v >= opts.gate_margin for v in minima.values())

    grid = (opts.gate_r_min, opts.gate_r_max, opts.gate_points)
    c, failing, it = opts.c_start, None, 0
    while True:
        it += 1
        if it > opts.gate_max_iter:
            raise GateFailed(f"No c in ({c:.3g}, {opts.c_start}] gives positive Ricci for k={k}, alpha={alpha}, m={m}")
        minima = grid_minima(c)
        logger.debug("Gate halving %d: c=%.6g minima %s", it, c, minima)
        if passes(minima):
            break
        failing, c = c, 0.5 * c

    while failing is not None and failing - c > 1e-6 * c and it < opts.gate_max_iter:
        it += 1
        mid = 0.5 * (c + failing)
        trial = grid_minima(mid)
        logger.debug("Gate bisection %d: c=%.6g minima %s", it, mid, trial)
        if passes(trial):
            c, minima = mid, trial
        else:
            failing = mid
    logger.info("Gate passed for k=%d alpha=%g: m=%d c=%.6g after %d iterations", k, alpha, m, c, it)
    return GateResult(m, c, minima, it, grid)


# ============================================================================
# Rescaled warping functions
# ============================================================================

def rescaled_warping(W: WarpingTriple, lam: float) -> Dict[str, Callable[[np.ndarray], np.ndarray]]:
    """f_lam(t) = f(lam t) / lam, g_lam(t) = g(lam t) / lam, h_lam(t) = lam^alpha h(lam t)."""
    if not lam > 0:
        raise ArgumentError(f"lambda must be positive, got {lam}")
    a, c = W.alpha, W.c

    def f_lam(t):
        t = np.asarray(t, dtype=float)
        return t / (1.0 + (lam * t) ** 2) ** 0.25

    def g_lam(t):
        t = np.asarray(t, dtype=float)
        return 0.5 * np.pi * c * t / np.arctan(lam * t)

    def h_lam(t):
        t = np.asarray(t, dtype=float)
        return lam**a / (1.0 + (lam * t) ** 2) ** (a / 2.0)

    return {"f": f_lam, "g": g_lam, "h": h_lam}


@dataclass(frozen=True)
class WarpingLimitReport:
    """
    Sup deviations on the window: |f_lam|, |g_lam - c t| / c and |h_lam - t^-alpha|.

    f_lam only decays like sqrt(t / lam); it must decrease and stay below
    sqrt(b / lam). g and h must decrease and fall below the threshold at the
    largest lam.
    """

    table: pd.DataFrame
    threshold: float
    window: Tuple[float, float]

    @property
    def decreasing(self) -> bool:
        return all(bool(np.all(np.diff(self.table[col]) < 0)) for col in ("f_dev", "g_dev", "h_dev"))

    @property
    def passed(self) -> bool:
        last = self.table.iloc[-1]
        f_bound = np.all(self.table["f_dev"] <= np.sqrt(self.window[1] / self.table["lambda"]) + 1e-15)
        return self.decreasing and bool(f_bound) and last["g_dev"] <= self.threshold and last["h_dev"] <= self.threshold


def asymptotic_warping_limit(
    W: WarpingTriple,
    lambdas: Sequence[float] = (10.0, 100.0, 1000.0),
    window: Tuple[float, float] = (0.5, 2.0),
    samples: int = 400,
    threshold: float = 1e-3,
) -> WarpingLimitReport:
    a, b = window
    if not 0 < a < b:
        raise ArgumentError(f"Window must satisfy 0 < a < b, got {window}")
    t = np.linspace(a, b, samples)
    rows = []
    for lam in lambdas:
        fns = rescaled_warping(W, lam)
        rows.append(
            {
                "lambda": float(lam),
                "f_dev": float(np.max(np.abs(fns["f"](t)))),
                "g_dev": float(np.max(np.abs(fns["g"](t) - W.c * t)) / W.c),
                "h_dev": float(np.max(np.abs(fns["h"](t) - t ** (-W.alpha)))),
            }
        )
    report = WarpingLimitReport(pd.DataFrame(rows), threshold, (a, b))
    logger.info("Warping limit on [%g, %g]: passed=%s", a, b, report.passed)
    return report


def axis_constant(alpha: float) -> float:
    """
    d((0, 0), (0, 1)) for the metric dr^2 + r^(-2 alpha) dy^2.

    Conservation of the y-momentum gives a closed form through two Beta
    integrals; for alpha = 1 the value is sqrt(2 pi).
    """
    if not alpha > 0:
        raise ArgumentError(f"alpha must be positive, got {alpha}")
    s = 1.0 / (2.0 * alpha)
    i1 = beta(s, 0.5) * s
    i2 = beta(1.0 + s, 0.5) * s
    rho = (2.0 * i2) ** (-1.0 / (1.0 + alpha))
    return float(2.0 * rho * i1)
