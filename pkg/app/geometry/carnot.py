"""
The Heisenberg lift of the Grushin plane.

Elements are exponential coordinates (a, b, c) of exp(a X1 + b X2 + c Y)
with X1 = d/dx, X2 = x d/dy and Y = [X1, X2] = d/dy. The law is the
closed-form BCH product of a step-two algebra and the projection is
pi(g) = g^-1(0) = (-a, ab/2 - c).

Vertical fields use the left convention xi_i(g) = d/dt exp(-t X_i) . g,
which is the abstract-group image of g o exp(-t X_i) once the reversal of
brackets under composition of flows is taken into account. With it
pi_* xi_i = X_i; pushforward_check evaluates both conventions.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from app.algebra import poly as P
from app.algebra.symfield import PolyVectorField, WeightVector
from app.errors import ArgumentError, InvariantBreach, LiftBaseError
from app.geometry.curves import ControlCurve
from app.geometry.geodesy import integrate_control
from app.geometry.integrate import integrate_piecewise
from app.geometry.library import grushin
from app.geometry.nilpotent import dilate
from app.geometry.structure import SubRiemannianStructure

logger = logging.getLogger(__name__)

GRUSHIN_WEIGHTS = WeightVector((1, 2))
CONVENTIONS = ("left", "right")


@dataclass(frozen=True)
class HeisenbergElement:
    a: float
    b: float
    c: float

    @classmethod
    def identity(cls) -> "HeisenbergElement":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values) -> "HeisenbergElement":
        a, b, c = (float(v) for v in values)
        return cls(a, b, c)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def __mul__(self, other: "HeisenbergElement") -> "HeisenbergElement":
        return group_multiply(self, other)


def group_multiply(g: HeisenbergElement, h: HeisenbergElement) -> HeisenbergElement:
    """exp(U) exp(V) = exp(U + V + [U, V] / 2)."""
    return HeisenbergElement(
        g.a + h.a,
        g.b + h.b,
        g.c + h.c + 0.5 * (g.a * h.b - g.b * h.a),
    )


def inverse(g: HeisenbergElement) -> HeisenbergElement:
    return HeisenbergElement(-g.a, -g.b, -g.c)


def group_dilate(g: HeisenbergElement, lam: float) -> HeisenbergElement:
    if not lam > 0:
        raise ArgumentError(f"Dilation factor must be positive, got {lam}")
    return HeisenbergElement(lam * g.a, lam * g.b, lam * lam * g.c)


def project(g) -> np.ndarray:
    """pi(g) = (-a, ab/2 - c); accepts elements or (..., 3) arrays."""
    if isinstance(g, HeisenbergElement):
        g = g.as_array()
    g = np.asarray(g, dtype=float)
    a, b, c = g[..., 0], g[..., 1], g[..., 2]
    return np.stack([-a, 0.5 * a * b - c], axis=-1)


def preimage(x) -> HeisenbergElement:
    """The element over x with the gauge b = 0."""
    x1, x2 = (float(v) for v in x)
    return HeisenbergElement(-x1, 0.0, -x2)


def vertical_fields(g: HeisenbergElement, convention: str = "left") -> np.ndarray:
    """
    Columns xi_1(g), xi_2(g) in exponential coordinates.

    "left" differentiates exp(-t X_i) . g, "right" differentiates g . exp(-t X_i).
    """
    if convention == "left":
        return np.array([[-1.0, 0.0], [0.0, -1.0], [-0.5 * g.b, 0.5 * g.a]])
    if convention == "right":
        return np.array([[-1.0, 0.0], [0.0, -1.0], [0.5 * g.b, -0.5 * g.a]])
    raise ArgumentError(f"Unknown convention {convention!r}")


def vertical_structure() -> SubRiemannianStructure:
    """xi_1 = -d/da - (b/2) d/dc, xi_2 = -d/db + (a/2) d/dc as polynomial fields."""
    xi1 = PolyVectorField.from_polys(3, [P.const(3, -1), {}, P.monomial((0, 1, 0), Fraction(-1, 2))])
    xi2 = PolyVectorField.from_polys(3, [{}, P.const(3, -1), P.monomial((1, 0, 0), Fraction(1, 2))])
    return SubRiemannianStructure(3, (xi1, xi2), "heisenberg_vertical")


def random_elements(count: int, rng: np.random.Generator, scale: float = 1.0) -> List[HeisenbergElement]:
    return [HeisenbergElement.from_array(v) for v in rng.uniform(-scale, scale, (count, 3))]


# ============================================================================
# Checks
# ============================================================================

@dataclass(frozen=True)
class PushforwardReport:
    """Max |d pi(xi_i(g)) - X_i(pi(g))| per convention and the one that holds."""

    deviations: Dict[str, float]
    convention: str
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviations[self.convention] <= self.tolerance


def _grushin_frame_at(x: np.ndarray) -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, x[0]]])


def pushforward_check(
    samples: Sequence[HeisenbergElement], eps: float = 1e-6, tol: float = 1e-6
) -> PushforwardReport:
    """Central differences of pi along xi_i(g), compared with X_i(pi(g))."""
    deviations = {}
    for convention in CONVENTIONS:
        worst = 0.0
        for g in samples:
            base = g.as_array()
            xi = vertical_fields(g, convention)
            target = _grushin_frame_at(project(base))
            for i in range(2):
                dpi = (project(base + eps * xi[:, i]) - project(base - eps * xi[:, i])) / (2.0 * eps)
                worst = max(worst, float(np.max(np.abs(dpi - target[:, i]))))
        deviations[convention] = worst
    holding = min(deviations, key=deviations.get)
    logger.info("Pushforward check: %s (convention %s holds)", deviations, holding)
    return PushforwardReport(deviations, holding, tol)


@dataclass(frozen=True)
class CommuteReport:
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def dilation_commute_check(
    samples: Sequence[HeisenbergElement], lambdas: Sequence[float], tol: float = 1e-10
) -> CommuteReport:
    """max |delta_lam(pi(g)) - pi(delta_hat_lam(g))| over samples and lambdas."""
    worst = 0.0
    for lam in lambdas:
        for g in samples:
            lhs = dilate(GRUSHIN_WEIGHTS, lam, project(g))
            rhs = project(group_dilate(g, lam))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CommuteReport(worst, tol)


# ============================================================================
# Lifts
# ============================================================================

@dataclass(frozen=True)
class LiftedCurve:
    """Samples of a horizontal lift, sharing the base curve's time grid and control."""

    times: np.ndarray
    elements: np.ndarray
    controls: np.ndarray

    @property
    def length(self) -> float:
        if len(self.times) < 2:
            return 0.0
        speeds = np.linalg.norm(self.controls[:-1], axis=1)
        return float(np.sum(speeds * np.diff(self.times)))

    def element(self, k: int) -> HeisenbergElement:
        return HeisenbergElement.from_array(self.elements[k])

    def projection(self) -> np.ndarray:
        return project(self.elements)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "t": self.times,
                "a": self.elements[:, 0],
                "b": self.elements[:, 1],
                "c": self.elements[:, 2],
                "u1": self.controls[:, 0],
                "u2": self.controls[:, 1],
            }
        )


def horizontal_lift(
    gamma: ControlCurve, g0: HeisenbergElement = HeisenbergElement.identity(), tol: float = 1e-8
) -> LiftedCurve:
    """
    Integrate g' = u_1 xi_1(g) + u_2 xi_2(g) with gamma's control on gamma's grid.

    Raises:
        LiftBaseError: if pi(g0) differs from gamma(0) by more than tol
    """
    if gamma.controls.shape[1] != 2 or gamma.dim != 2:
        raise ArgumentError("Horizontal lifts are defined for curves of the Grushin plane")
    offset = float(np.max(np.abs(project(g0) - gamma.start)))
    if offset > tol:
        raise LiftBaseError(
            f"pi(g0) = {project(g0).tolist()} does not match gamma(0) = {gamma.start.tolist()}"
        )
    if len(gamma.times) < 2:
        return LiftedCurve(gamma.times.copy(), g0.as_array()[None], gamma.controls.copy())
    lifted = integrate_piecewise(
        vertical_structure().frame, g0.as_array(), gamma.controls[:-1], np.diff(gamma.times), 1
    )
    lift = LiftedCurve(gamma.times.copy(), lifted.states, gamma.controls.copy())
    logger.debug(
        "Lift of %d samples: projection error %.3e",
        len(gamma.times), float(np.max(np.abs(lift.projection() - gamma.states))),
    )
    return lift


def constant_control_descent(lift: LiftedCurve, tol: float = 1e-10) -> ControlCurve:
    """
    Project a constant-control lift and check the projection is the flow of
    u_1 X_1 + u_2 X_2 from pi(g(0)).

    Raises:
        ArgumentError: if the control is not constant
        InvariantBreach: if the projection leaves that flow
    """
    u = lift.controls[0]
    if np.max(np.abs(lift.controls - u)) > tol:
        raise ArgumentError("Lift control is not constant")
    states = lift.projection()
    duration = float(lift.times[-1] - lift.times[0])
    if duration > 0:
        flow = integrate_control(grushin(), states[0], u[None], duration)
        reference = np.atleast_2d(flow.state_at(lift.times - lift.times[0]))
        error = float(np.max(np.abs(reference - states)))
        if error > 1e-6:
            raise InvariantBreach(f"Projected lift leaves the constant-control flow (error {error:.3e})")
    return ControlCurve(lift.times.copy(), states, lift.controls.copy())


def lift_line(u, T: float = 1.0, steps: int = 1000) -> Tuple[ControlCurve, LiftedCurve]:
    """Base line exp(t (u_1 X_1 + u_2 X_2))(0) and its lift from the identity."""
    u = np.asarray(u, dtype=float)
    base = integrate_control(grushin(), np.zeros(2), u[None], T, steps)
    return base, horizontal_lift(base)
