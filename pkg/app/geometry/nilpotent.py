"""
Dilations, nilpotent approximation and blow-ups of geodesics.

Structures are assumed to be given in privileged coordinates centered at 0
with weights w; nothing here constructs such coordinates.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.interpolate import interp1d

from app.algebra.symfield import WeightVector, dilation_pushforward, evaluate_exact, weighted_split
from app.config.settings import DistanceOptions
from app.errors import ArgumentError, BadCenteringError, WindowError
from app.geometry.curves import ControlCurve
from app.geometry.geodesy import cc_distance, integrate_control
from app.geometry.structure import SubRiemannianStructure, flag_at, minimal_control

logger = logging.getLogger(__name__)


def _check_lambda(lam) -> None:
    if not lam > 0:
        raise ArgumentError(f"Dilation factor must be positive, got {lam}")


@dataclass(frozen=True)
class DilationFamily:
    """delta_lam(x) = (lam^w_1 x_1, .., lam^w_n x_n) and the pseudo-norm sum |x_j|^(1/w_j)."""

    weights: WeightVector

    def __call__(self, lam: float, x) -> np.ndarray:
        _check_lambda(lam)
        x = np.asarray(x, dtype=float)
        return x * np.power(float(lam), self.weights.as_array())

    def norm(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sum(np.abs(x) ** (1.0 / self.weights.as_array()), axis=-1)


def dilate(w: WeightVector, lam: float, x) -> np.ndarray:
    return DilationFamily(w)(lam, x)


def pseudo_norm(w: WeightVector, x):
    return DilationFamily(w).norm(x)


# ============================================================================
# Nilpotent approximation and rescaling
# ============================================================================

def nilpotent_approximation(S: SubRiemannianStructure, w: WeightVector) -> SubRiemannianStructure:
    """
    The homogeneous parts X_hat_i of the generators.

    Raises:
        NotPrivilegedError: a generator has terms of weighted degree < -1
        BadCenteringError: a remainder R_i does not vanish at 0
        HormanderUndecided: the X_hat_i do not bracket-generate at 0
    """
    origin = [0] * S.dim
    hats = []
    for i, X in enumerate(S.generators):
        hat, rem = weighted_split(X, w)
        if any(evaluate_exact(rem, origin)):
            raise BadCenteringError(f"Remainder of X{i + 1} in {S.label} does not vanish at 0")
        hats.append(hat)
    approx = SubRiemannianStructure(S.dim, tuple(hats), f"{S.label}_hat")
    flag = flag_at(approx, [0.0] * S.dim)
    logger.info("Nilpotent approximation of %s: growth %s at 0", S.label, flag.growth)
    return approx


def rescaled_structure(S: SubRiemannianStructure, w: WeightVector, lam) -> SubRiemannianStructure:
    """
    Generators X_i^lam = lam^-1 (delta_lam)_* X_i, exact for rational lam.

    Distances of this structure are lam d_F(delta_{1/lam} x, delta_{1/lam} y),
    and X^lam tends to X_hat term by term as lam grows.
    """
    _check_lambda(lam)
    lam = Fraction(lam)
    fields = tuple(dilation_pushforward(X, w, lam).scale(1 / lam) for X in S.generators)
    return SubRiemannianStructure(S.dim, fields, f"{S.label}@{float(lam):g}")


def rescaled_distance(
    S: SubRiemannianStructure,
    w: WeightVector,
    lam: float,
    x,
    y,
    opts: DistanceOptions = DistanceOptions(),
    method: str = "structure",
) -> float:
    """
    d_lam(x, y) = lam d_F(delta_{1/lam} x, delta_{1/lam} y), as an upper bound.

    method="structure" computes the distance of rescaled_structure directly;
    method="scaled" applies the formula literally.
    """
    _check_lambda(lam)
    if method == "structure":
        return cc_distance(rescaled_structure(S, w, lam), x, y, opts).upper
    if method == "scaled":
        inv = 1.0 / lam
        return lam * cc_distance(S, dilate(w, inv, x), dilate(w, inv, y), opts).upper
    raise ArgumentError(f"Unknown rescaling method {method!r}")


def rescaled_distance_table(
    S: SubRiemannianStructure,
    w: WeightVector,
    lambdas: Sequence[float],
    x,
    y,
    opts: DistanceOptions = DistanceOptions(),
    method: str = "structure",
) -> pd.DataFrame:
    """d_lam(x, y) against the nilpotent distance for each lam."""
    d_hat = cc_distance(nilpotent_approximation(S, w), x, y, opts).upper
    values = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(rescaled_distance)(S, w, lam, x, y, opts, method) for lam in lambdas
    )
    table = pd.DataFrame({"lambda": list(lambdas), "d_lambda": values})
    table["d_hat"] = d_hat
    table["deviation"] = (table["d_lambda"] - d_hat).abs()
    return table


# ============================================================================
# Blow-ups
# ============================================================================

def blow_up_normal(
    S: SubRiemannianStructure,
    w: WeightVector,
    v,
    T: float = 1.0,
    steps: Optional[int] = None,
    two_sided: bool = False,
) -> ControlCurve:
    """
    The line t -> exp(t v_hat)(0) in the nilpotent approximation, where
    v_hat = sum_i u*_i X_hat_i and u* is the minimal control of v at 0.

    With two_sided=True the curve runs over [-T, T].

    Raises:
        NotHorizontal: if v is not in D_0
    """
    u = minimal_control(S, [0.0] * S.dim, v).u
    S_hat = nilpotent_approximation(S, w)
    forward = integrate_control(S_hat, np.zeros(S.dim), u[None], T, steps)
    if not two_sided:
        return forward
    backward = integrate_control(S_hat, np.zeros(S.dim), -u[None], T, steps)
    times = np.concatenate([-backward.times[:0:-1], forward.times])
    states = np.vstack([backward.states[:0:-1], forward.states])
    controls = np.tile(u, (len(times), 1))
    return ControlCurve(times, states, controls)


def blow_up_line_check(
    S: SubRiemannianStructure,
    w: WeightVector,
    v,
    T: float = 1.0,
    opts: DistanceOptions = DistanceOptions(),
    tol: float = 1e-3,
) -> Tuple[float, bool]:
    """
    d_hat(gamma(-T), gamma(T)) >= 2 T |v|_0 - tol for the blown-up line.

    Returns:
        (upper bound of d_hat(gamma(-T), gamma(T)), passed)
    """
    line = blow_up_normal(S, w, v, T, two_sided=True)
    speed = minimal_control(S, [0.0] * S.dim, v).norm
    d = cc_distance(nilpotent_approximation(S, w), line.start, line.end, opts).upper
    return d, bool(d >= 2.0 * T * speed - tol)


@dataclass(frozen=True)
class BlowUpReport:
    """
    Sup deviations of the rescaled curves on the window, one per lambda.

    In "candidate" mode deviations are against a supplied limit curve; in
    "cauchy" mode row k compares lambda_k with lambda_{k-1}.
    """

    lambdas: Tuple[float, ...]
    deviations: Tuple[float, ...]
    tolerance: float
    mode: str

    @property
    def converged(self) -> bool:
        return bool(self.deviations) and self.deviations[-1] <= self.tolerance

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "lambda": self.lambdas,
                "sup_deviation": self.deviations,
                "verdict": ["converged" if d <= self.tolerance else "open" for d in self.deviations],
            }
        )


def _sampler(curve: ControlCurve):
    kind = "cubic" if len(curve.times) >= 4 else "linear"
    return interp1d(curve.times, curve.states, axis=0, kind=kind, assume_sorted=True)


def rescaled_curve(w: WeightVector, curve: ControlCurve, lam: float, times) -> np.ndarray:
    """gamma^lam(t) = delta_lam(gamma(t / lam)) at the given times."""
    _check_lambda(lam)
    return dilate(w, lam, _sampler(curve)(np.asarray(times, float) / lam))


def blow_up_convergence(
    S: SubRiemannianStructure,
    w: WeightVector,
    gamma: ControlCurve,
    lambdas: Sequence[float],
    window: float = 1.0,
    candidate: Optional[ControlCurve] = None,
    tol: float = 1e-3,
    samples: int = 201,
) -> BlowUpReport:
    """
    Sup over t in [0, window] of the pseudo-norm deviation of gamma^lam.

    Raises:
        ArgumentError: gamma does not start at 0 or the schedule is not increasing
        WindowError: gamma (or the candidate) is too short for the window
    """
    if not np.allclose(gamma.start, 0.0, atol=1e-12):
        raise ArgumentError(f"Curve must start at 0, starts at {gamma.start.tolist()}")
    lambdas = [float(lam) for lam in lambdas]
    if not lambdas or any(lam <= 0 for lam in lambdas) or np.any(np.diff(lambdas) <= 0):
        raise ArgumentError(f"Lambda schedule must be positive and strictly increasing: {lambdas}")
    if gamma.times[0] != 0.0 or window / lambdas[0] > gamma.times[-1] + 1e-12:
        raise WindowError(
            f"Window [0, {window}] needs gamma on [0, {window / lambdas[0]:.6g}], "
            f"have [{gamma.times[0]:.6g}, {gamma.times[-1]:.6g}]"
        )
    t = np.linspace(0.0, window, samples)
    dil = DilationFamily(w)
    curves = [rescaled_curve(w, gamma, lam, t) for lam in lambdas]

    if candidate is not None:
        if candidate.times[0] > 0.0 or candidate.times[-1] < window - 1e-12:
            raise WindowError(f"Candidate curve does not cover [0, {window}]")
        target = _sampler(candidate)(t)
        deviations = [float(np.max(dil.norm(c - target))) for c in curves]
        report = BlowUpReport(tuple(lambdas), tuple(deviations), tol, "candidate")
    else:
        deviations = [float(np.max(dil.norm(b - a))) for a, b in zip(curves, curves[1:])]
        report = BlowUpReport(tuple(lambdas[1:]), tuple(deviations), tol, "cauchy")
    logger.info(
        "Blow-up of %s (%s): deviations %s", S.label, report.mode,
        ", ".join(f"{d:.3g}" for d in report.deviations),
    )
    return report


def dilation_line_identity_check(
    S_hat: SubRiemannianStructure,
    w: WeightVector,
    v,
    times: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0),
    tol: float = 1e-8,
) -> bool:
    """exp(t v_hat)(0) = delta_t(exp(v_hat)(0)), each side from its own RK4 flow."""
    origin = np.zeros(S_hat.dim)
    u = minimal_control(S_hat, origin, v).u[None]
    unit = integrate_control(S_hat, origin, u, 1.0).end
    worst = 0.0
    for t in times:
        direct = integrate_control(S_hat, origin, u, t).end
        worst = max(worst, float(np.max(np.abs(direct - dilate(w, t, unit)))))
    logger.info("Dilation line identity on %s: max error %.3e", S_hat.label, worst)
    return worst <= tol


# ============================================================================
# Numerical checks on the nilpotent distance
# ============================================================================

@dataclass(frozen=True)
class AngleCheckRow:
    theta: float
    sign: int
    t: float
    upper: float
    lower: float
    target: float
    passed: bool


def angle_estimate_check(
    S_hat: SubRiemannianStructure,
    w: WeightVector,
    thetas: Sequence[float] = (np.pi / 2, np.pi / 3),
    times: Sequence[float] = (0.1, 0.5, 1.0),
    opts: DistanceOptions = DistanceOptions(),
    tol: float = 1e-3,
) -> pd.DataFrame:
    """
    For unit v1, v2 in D_0 at angle theta, compare d_hat(gamma_1(sign t), gamma_2(t))
    with |t| sqrt(2 - 2 sign cos theta).

    D_0 must be at least two-dimensional. v1, v2 are orthonormal for |.|_0:
    they are the images F(0) V_k of the two leading right singular vectors.
    A row passes when the certified lower bound reaches the target.
    """
    origin = np.zeros(S_hat.dim)
    F = S_hat.frame.values(origin)
    if np.linalg.matrix_rank(F) < 2:
        raise ArgumentError(f"D_0 of {S_hat.label} is one-dimensional; no angles to check")
    _, _, Vt = np.linalg.svd(F)
    e1, e2 = F @ Vt[0], F @ Vt[1]
    rows = []
    for theta in thetas:
        v1 = e1
        v2 = np.cos(theta) * e1 + np.sin(theta) * e2
        line1 = blow_up_normal(S_hat, w, v1, max(times), two_sided=True)
        line2 = blow_up_normal(S_hat, w, v2, max(times))
        for sign in (1, -1):
            for t in times:
                a = line1.state_at(sign * t)
                b = line2.state_at(t)
                est = cc_distance(S_hat, a, b, opts)
                target = abs(t) * np.sqrt(2.0 - 2.0 * sign * np.cos(theta))
                rows.append(
                    AngleCheckRow(theta, sign, t, est.upper, est.lower, target, est.lower >= target - tol)
                )
    return pd.DataFrame([r.__dict__ for r in rows])


@dataclass(frozen=True)
class BallBoxConstants:
    c1: float
    c2: float
    points: np.ndarray
    ratios: np.ndarray


def ball_box_constants(
    S_hat: SubRiemannianStructure,
    w: WeightVector,
    count: int = 9,
    opts: DistanceOptions = DistanceOptions(),
) -> BallBoxConstants:
    """
    Empirical c1, c2 with c1 |x| <= d_hat(0, x) <= c2 |x| (pseudo-norm |x|).

    By homogeneity it suffices to sample the unit pseudo-sphere; points are
    taken in the closed positive orthant along the curve
    s -> (s^w_1 a_1, .., s^w_n a_n) for a simplex of weights a.
    """
    n = S_hat.dim
    weights = w.as_array()
    if n == 2:
        s = np.linspace(0.0, 1.0, count)
        points = np.stack([s ** weights[0], (1.0 - s) ** weights[1]], axis=1)
    else:
        rng = np.random.default_rng(opts.seed)
        shares = rng.dirichlet(np.ones(n), size=count)
        points = shares ** weights
    origin = np.zeros(n)
    distances = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(cc_distance)(S_hat, origin, x, opts) for x in points
    )
    ratios = np.array([d.upper for d in distances]) / pseudo_norm(w, points)
    logger.info("Ball-box constants of %s: c1=%.6g c2=%.6g", S_hat.label, ratios.min(), ratios.max())
    return BallBoxConstants(float(ratios.min()), float(ratios.max()), points, ratios)

