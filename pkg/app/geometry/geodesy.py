"""
Carnot-Caratheodory distances and geodesics.

Two independent routes: shooting for normal geodesics (app.geometry.shooting)
and direct energy minimization over piecewise-constant controls
(app.geometry.direct). cc_distance uses the direct route, seeded by
shooting, and returns a certified upper bound together with a lower bound.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.config.settings import DistanceOptions, ShootingOptions, StructureOptions
from app.errors import (
    ArgumentError,
    DimensionError,
    FrameExtensionFailed,
    HormanderUndecided,
    InvariantBreach,
)
from app.geometry.curves import ControlCurve, constant_curve
from app.geometry.direct import close_endpoint, minimize_energy
from app.geometry.integrate import (
    DEFAULT_STEPS,
    _check_box,
    flow_hamiltonian,
    hamiltonian,
    integrate_piecewise,
    substeps_for,
)
from app.geometry.shooting import ShootingBatch, sample_geodesics, shoot, shoot_many
from app.geometry.structure import (
    SubRiemannianStructure,
    riemannian_lower_bound_metric,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceEstimate:
    """
    Certified upper bound, best known lower bound and the certificate.

    `converged` is False when the certificate misses q by more than the
    endpoint tolerance; the estimate is still returned.
    """

    upper: float
    lower: float
    control: ControlCurve
    converged: bool = True
    endpoint_error: float = 0.0

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _points(S: SubRiemannianStructure, *points):
    out = []
    for x in points:
        x = np.asarray(x, dtype=float)
        if x.shape != (S.dim,):
            raise DimensionError(f"Point of shape {x.shape} for a structure on R^{S.dim}")
        out.append(x)
    return out


# ============================================================================
# Admissible curves
# ============================================================================

def integrate_control(
    S: SubRiemannianStructure,
    p0,
    controls,
    T: float = 1.0,
    steps: Optional[int] = None,
    durations: Optional[Sequence[float]] = None,
) -> ControlCurve:
    """
    RK4 trajectory of x' = sum_i u_i X_i(x) for piecewise-constant u.

    Args:
        controls: (N, m) array, one row per segment (a single row is a constant control)
        T: total duration, split evenly unless `durations` is given
        steps: total RK4 steps (default 1000, so h <= T / 1000)

    Raises:
        DomainEscape: if the trajectory leaves S.box or blows up
    """
    (p0,) = _points(S, p0)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if T <= 0:
        raise ArgumentError(f"Duration must be positive, got {T}")
    if not np.all(np.isfinite(controls)):
        raise ArgumentError("Controls must be finite")
    N = len(controls)
    if durations is None:
        durations = np.full(N, T / N)
    return integrate_piecewise(
        S.frame, p0, controls, np.asarray(durations, float), substeps_for(N, steps), S.box_arrays
    )


def normal_geodesic(
    S: SubRiemannianStructure, p0, lam0, T: float = 1.0, steps: Optional[int] = None
) -> ControlCurve:
    """
    Projection of the Hamiltonian flow from (p0, lam0), with control
    u_i(t) = <lam(t), X_i(gamma(t))>.

    Raises:
        ArgumentError: if H(lam0, p0) = 0 or T <= 0
        DomainEscape: if the trajectory leaves S.box or blows up
    """
    p0, lam0 = _points(S, p0, lam0)
    if T <= 0:
        raise ArgumentError(f"Duration must be positive, got {T}")
    if hamiltonian(S.frame, p0, lam0) <= 0.0:
        raise ArgumentError("Covector annihilates the distribution (H = 0): trivial geodesic")
    steps = max(200, steps or int(np.ceil(DEFAULT_STEPS * T)))
    xs, _, hs = flow_hamiltonian(S.frame, p0, lam0, T, steps, record=True)
    times = np.linspace(0.0, T, steps + 1)
    box = S.box_arrays
    for t, x in zip(times, xs):
        _check_box(x, box, t)
    return ControlCurve(times, xs, hs)


# ============================================================================
# Lower bounds
# ============================================================================

def projection_bound(S: SubRiemannianStructure, p, q) -> float:
    """
    Least control norm that moves the constant coordinates by q_J - p_J.

    J collects the coordinates whose generator components are constants, so
    x_J' = C u along any admissible curve for a fixed (|J|, m) matrix C and
    the length is at least |C^+ (q_J - p_J)|.
    """
    rows, coords = [], []
    for j in range(S.dim):
        consts = []
        for X in S.generators:
            poly = X.poly(j)
            if any(sum(mono) > 0 for mono in poly):
                break
            consts.append(float(sum(poly.values())))
        else:
            if any(consts):
                rows.append(consts)
                coords.append(j)
    if not rows:
        return 0.0
    C = np.asarray(rows)
    delta = np.asarray(q, dtype=float)[coords] - np.asarray(p, dtype=float)[coords]
    return float(np.linalg.norm(np.linalg.pinv(C) @ delta))


def distance_lower_bound(
    S: SubRiemannianStructure,
    p,
    q,
    mode: str = "riemannian",
    structure_opts: StructureOptions = StructureOptions(),
) -> float:
    """
    Lower bound on d_F(p, q).

    "box" uses sqrt(mu_min) times the Euclidean length spent in the certified
    box at p. "riemannian" also measures that length in the frozen metric
    g(p), scaled by the certified comparison constant c with g >= c g(p) on
    the box. The coordinate-projection bound is always included.
    """
    p, q = _points(S, p, q)
    bound = projection_bound(S, p, q)
    if mode == "none":
        return bound
    try:
        metric = riemannian_lower_bound_metric(S, p, structure_opts)
    except (HormanderUndecided, FrameExtensionFailed) as exc:
        logger.warning("No certified box at %s (%s); using projection bound only", p.tolist(), exc)
        return bound
    bound = max(bound, metric.lower_bound(p, q))
    if mode == "riemannian":
        bound = max(bound, metric.anisotropic_bound(p, q))
    return float(bound)


# ============================================================================
# Distances
# ============================================================================

def cc_distance(
    S: SubRiemannianStructure,
    p,
    q,
    opts: DistanceOptions = DistanceOptions(),
    shooting_opts: Optional[ShootingOptions] = None,
    structure_opts: StructureOptions = StructureOptions(),
) -> DistanceEstimate:
    """
    Carnot-Caratheodory distance estimate by direct energy minimization.

    The certificate is the optimized piecewise-constant control integrated
    with at least opts.certificate_steps RK4 steps; `upper` is its length.

    Returns:
        DistanceEstimate with lower <= upper

    Raises:
        InvariantBreach: if the lower bound at the certificate's own endpoint
            exceeds the certificate length
    """
    p, q = _points(S, p, q)
    if np.array_equal(p, q):
        return DistanceEstimate(0.0, 0.0, constant_curve(p, S.m))

    N = opts.segments
    U, _ = minimize_energy(S, p, q, opts, shooting_opts)
    fine = substeps_for(N, opts.certificate_steps)
    U = close_endpoint(S.frame, p, q, U, fine, opts.newton_iterations, 1e-2 * opts.endpoint_tol)
    certificate = integrate_piecewise(S.frame, p, U, np.full(N, 1.0 / N), fine, S.box_arrays)

    error = float(np.linalg.norm(certificate.end - q))
    converged = error <= opts.endpoint_tol
    upper = certificate.length
    if not converged:
        logger.warning(
            "Distance %s -> %s unconverged: endpoint error %.3e", p.tolist(), q.tolist(), error
        )

    lower = distance_lower_bound(S, p, q, opts.lower_bound, structure_opts)
    if lower > upper:
        reached = distance_lower_bound(S, p, certificate.end, opts.lower_bound, structure_opts)
        if reached > upper + 1e-9 * (1.0 + upper):
            raise InvariantBreach(
                f"Lower bound {reached:.10g} exceeds the length {upper:.10g} of a curve reaching its endpoint"
            )
        logger.debug("Lower bound %.10g above upper %.10g from the endpoint miss; clamping", lower, upper)
        lower = upper
    logger.info("d(%s, %s) in [%.8g, %.8g]", p.tolist(), q.tolist(), lower, upper)
    return DistanceEstimate(upper, lower, certificate, converged, error)


def geodesic_between(
    S: SubRiemannianStructure,
    p,
    q,
    opts: DistanceOptions = DistanceOptions(),
    estimate: Optional[DistanceEstimate] = None,
) -> ControlCurve:
    """
    The cc_distance certificate reparametrized to constant speed on [0, 1].

    Each segment k keeps its direction and gets duration |u_k| / L with
    control L u_k / |u_k|; RK4 with the same substeps reproduces the same
    states, so only the time grid and control magnitudes change.
    """
    p, q = _points(S, p, q)
    estimate = estimate or cc_distance(S, p, q, opts)
    L = estimate.upper
    if L <= 0.0:
        return constant_curve(p, S.m)

    curve = estimate.control
    N = opts.segments
    substeps = (len(curve.times) - 1) // N
    U = curve.controls[:-1:substeps]
    seg = np.linalg.norm(U, axis=1) / N
    keep = seg > 1e-12 * L
    U = U[keep]
    speeds = np.linalg.norm(U, axis=1)
    durations = speeds / N / L
    durations = durations / durations.sum()
    return integrate_piecewise(S.frame, p, L * U / speeds[:, None], durations, substeps, S.box_arrays)


def distance_matrix(
    S: SubRiemannianStructure,
    points,
    opts: DistanceOptions = DistanceOptions(),
) -> pd.DataFrame:
    """
    Distance estimates between all unordered pairs of points.

    Returns:
        DataFrame with columns i, j, upper, lower, converged (i < j)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    pairs = [(i, j) for i in range(len(points)) for j in range(i + 1, len(points))]
    estimates = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(cc_distance)(S, points[i], points[j], opts) for i, j in pairs
    )
    return pd.DataFrame(
        {
            "i": [i for i, _ in pairs],
            "j": [j for _, j in pairs],
            "upper": [e.upper for e in estimates],
            "lower": [e.lower for e in estimates],
            "converged": [e.converged for e in estimates],
        }
    )
