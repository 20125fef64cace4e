"""
Sub-Riemannian structures given by finite families of polynomial fields.

Provides flags and weights at a point, minimal controls, curve lengths and
the auxiliary Riemannian metric that bounds the Carnot-Caratheodory
distance from below on a certified coordinate box.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize

from app.algebra.compiled import CompiledFrame
from app.algebra.symfield import (
    PolyVectorField,
    WeightVector,
    evaluate_exact,
    iter_bracket_levels,
)
from app.config.settings import StructureOptions
from app.errors import (
    ArgumentError,
    DimensionError,
    FrameExtensionFailed,
    HormanderUndecided,
    NotHorizontal,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubRiemannianStructure:
    """
    Generators X_1..X_m on R^n.

    Attributes:
        dim: ambient dimension n
        generators: the family F
        label: short name used in reports
        box: optional (lo, hi) coordinate box trajectories must stay in
    """

    dim: int
    generators: Tuple[PolyVectorField, ...]
    label: str = "structure"
    box: Optional[Tuple[Tuple[float, ...], Tuple[float, ...]]] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise DimensionError("A structure needs at least one generator")
        for X in self.generators:
            if X.dim != self.dim:
                raise DimensionError(
                    f"Generator of dim {X.dim} in a structure on R^{self.dim}"
                )

    @property
    def m(self) -> int:
        return len(self.generators)

    @cached_property
    def frame(self) -> CompiledFrame:
        return CompiledFrame(self.generators)

    @property
    def box_arrays(self):
        if self.box is None:
            return None
        return np.asarray(self.box[0], float), np.asarray(self.box[1], float)

    def with_generators(self, generators: Sequence[PolyVectorField], label: str) -> "SubRiemannianStructure":
        return SubRiemannianStructure(self.dim, tuple(generators), label, self.box)


@dataclass(frozen=True)
class Flag:
    """Growth vector (n_1..n_r), weights and step at a point."""

    growth: Tuple[int, ...]
    weights: WeightVector
    step: int

    @classmethod
    def from_growth(cls, growth: Sequence[int]) -> "Flag":
        growth = tuple(int(g) for g in growth)
        n = growth[-1]
        weights = [next(i + 1 for i, ni in enumerate(growth) if j <= ni) for j in range(1, n + 1)]
        return cls(growth, WeightVector(tuple(weights)), len(growth))


@dataclass(frozen=True)
class MinimalControl:
    u: np.ndarray
    residual: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.u))


def numeric_rank(vectors: np.ndarray, rel_tol: float) -> int:
    """Rank with singular values below rel_tol * largest counted as zero."""
    if vectors.size == 0:
        return 0
    s = np.linalg.svd(vectors, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


# ============================================================================
# Flags
# ============================================================================

def flag_at(
    S: SubRiemannianStructure,
    p: Sequence[float],
    max_depth: int = 6,
    rank_tol: float = 1e-9,
) -> Flag:
    """
    Growth vector at p from iterated brackets of depth <= max_depth.

    Brackets are evaluated exactly at the rational point p (floats are
    converted exactly) and only then ranked in floating point.

    Raises:
        HormanderUndecided: if the brackets up to max_depth do not span R^n
    """
    if len(p) != S.dim:
        raise DimensionError(f"Point of length {len(p)} for a structure on R^{S.dim}")
    point = [Fraction(v) for v in p]
    vectors: List[List[float]] = []
    growth: List[int] = []
    for depth, level in enumerate(iter_bracket_levels(S.generators), start=1):
        vectors.extend([float(c) for c in evaluate_exact(B, point)] for B in level)
        growth.append(numeric_rank(np.asarray(vectors), rank_tol))
        if growth[-1] == S.dim:
            break
        if depth >= max_depth:
            raise HormanderUndecided(max_depth, tuple(growth))
    logger.debug("Flag of %s at %s: growth %s", S.label, tuple(p), growth)
    return Flag.from_growth(growth)


# ============================================================================
# Minimal controls and lengths
# ============================================================================

def minimal_control(
    S: SubRiemannianStructure, p: Sequence[float], v: Sequence[float], tol: float = 1e-9
) -> MinimalControl:
    """
    Least-norm u with sum_i u_i X_i(p) = v.

    Raises:
        NotHorizontal: if v is not in the span of the X_i(p)
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (S.dim,):
        raise DimensionError(f"Vector of shape {v.shape} for a structure on R^{S.dim}")
    F = S.frame.values(np.asarray(p, dtype=float))
    u, *_ = np.linalg.lstsq(F, v, rcond=None)
    residual = float(np.linalg.norm(F @ u - v))
    if residual > tol * max(1.0, float(np.linalg.norm(v))):
        raise NotHorizontal(f"Vector {v.tolist()} is not horizontal at {list(p)} (residual {residual:.3g})")
    return MinimalControl(u, residual)


def sub_riemannian_norm(S: SubRiemannianStructure, p, v, tol: float = 1e-9) -> float:
    return minimal_control(S, p, v, tol).norm


def curve_length(
    S: SubRiemannianStructure,
    samples: Sequence[Tuple[float, Sequence[float], Sequence[float]]],
    tol: float = 1e-9,
) -> float:
    """
    Length of a sampled curve by trapezoid quadrature of |velocity|_point.

    Args:
        samples: (t, point, velocity) triples with increasing t
    """
    times = np.array([s[0] for s in samples], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ArgumentError("Sample times must be strictly increasing")
    speeds = []
    for t, point, velocity in samples:
        try:
            speeds.append(minimal_control(S, point, velocity, tol).norm)
        except NotHorizontal as exc:
            raise NotHorizontal(str(exc), time=t) from exc
    if len(speeds) < 2:
        return 0.0
    return float(trapezoid(speeds, times))


# ============================================================================
# Riemannian lower-bound metric
# ============================================================================

@dataclass(frozen=True)
class LowerBoundMetric:
    """
    Frame metric of the generators plus adjoined coordinate fields.

    |v|_g^2 is the least sum of squared coefficients over representations of
    v in the extended frame, i.e. g(x) = (A A^T)^{-1} with A = [X_1..X_m, e_j..].
    Since the extended family contains F, d_g <= d_F.
    """

    structure: SubRiemannianStructure
    center: Tuple[float, ...]
    adjoined: Tuple[int, ...]
    box_lo: np.ndarray
    box_hi: np.ndarray
    mu_min: float
    reference: Optional[np.ndarray] = None
    comparison: float = 0.0

    def frame_matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        F = self.structure.frame.values(x)
        E = np.zeros(x.shape[:-1] + (self.structure.dim, len(self.adjoined)))
        for col, j in enumerate(self.adjoined):
            E[..., j, col] = 1.0
        return np.concatenate([F, E], axis=-1)

    def cometric(self, x) -> np.ndarray:
        A = self.frame_matrix(x)
        return A @ np.swapaxes(A, -1, -2)

    def metric(self, x) -> np.ndarray:
        return np.linalg.inv(self.cometric(x))

    def norm(self, x, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(v @ self.metric(x) @ v))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.box_lo) and np.all(x <= self.box_hi))

    def boundary_distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(max(0.0, min(np.min(x - self.box_lo), np.min(self.box_hi - x))))

    def lower_bound(self, p, q) -> float:
        """
        sqrt(mu_min) times the Euclidean length any curve from p to q must
        spend inside the box.
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if not self.contains(p):
            return 0.0
        if self.contains(q):
            inside = min(
                float(np.linalg.norm(p - q)),
                self.boundary_distance(p) + self.boundary_distance(q),
            )
        else:
            inside = self.boundary_distance(p)
        return float(np.sqrt(self.mu_min) * inside)

    def exit_length(self, x) -> float:
        """Reference-norm distance from x to the nearest face of the box."""
        x = np.asarray(x, dtype=float)
        face_scale = np.sqrt(np.diag(np.linalg.inv(self.reference)))
        gaps = np.minimum(x - self.box_lo, self.box_hi - x)
        return float(max(0.0, np.min(gaps / face_scale)))

    def anisotropic_bound(self, p, q) -> float:
        """
        sqrt(comparison) times the reference-norm length any curve from p to q
        must spend inside the box, where g >= comparison * reference on the
        certified box and reference = g(center).
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.reference is None or not self.contains(p):
            return 0.0
        if self.contains(q):
            d = q - p
            inside = min(float(np.sqrt(d @ self.reference @ d)), self.exit_length(p) + self.exit_length(q))
        else:
            inside = self.exit_length(p)
        return float(np.sqrt(self.comparison) * inside)


def _greedy_adjoin(F: np.ndarray, rank_tol: float) -> List[int]:
    """Coordinate fields with largest residual to the current span, one at a time."""
    n = F.shape[0]
    basis = F.copy()
    adjoined: List[int] = []
    while numeric_rank(basis.T, rank_tol) < n:
        if basis.size and np.linalg.norm(basis) > 0:
            U, s, _ = np.linalg.svd(basis, full_matrices=False)
            U = U[:, s > rank_tol * s[0]]
            residuals = 1.0 - np.sum(U * U, axis=1)
        else:
            residuals = np.ones(n)
        residuals[adjoined] = -np.inf
        j = int(np.argmax(residuals))
        adjoined.append(j)
        e = np.zeros((n, 1))
        e[j] = 1.0
        basis = np.hstack([basis, e])
    return sorted(adjoined)


def riemannian_lower_bound_metric(
    S: SubRiemannianStructure,
    p: Sequence[float],
    opts: StructureOptions = StructureOptions(),
) -> LowerBoundMetric:
    """
    Extend the generators at p by coordinate fields and certify a box.

    The box starts as a cube of half-width opts.box_half_width around p and
    is halved until det(A A^T) >= opts.det_threshold on a sample grid.
    On the same grid it records mu_min, the least eigenvalue of g, and the
    largest c with g >= c g(p).

    Raises:
        HormanderUndecided: from the flag precondition
        FrameExtensionFailed: if no box passes
    """
    flag_at(S, p, opts.max_depth, opts.rank_tol)
    center = np.asarray(p, dtype=float)
    adjoined = tuple(_greedy_adjoin(S.frame.values(center), opts.rank_tol))

    half = opts.box_half_width
    for _ in range(opts.box_shrink_steps):
        axes = [np.linspace(c - half, c + half, opts.box_grid) for c in center]
        grid = np.array(list(product(*axes)))
        trial = LowerBoundMetric(S, tuple(center), adjoined, center - half, center + half, 0.0)
        G = trial.cometric(grid)
        dets = np.linalg.det(G)
        if np.all(dets >= opts.det_threshold):
            mu_min = float(np.min(1.0 / np.linalg.eigvalsh(G)[:, -1]))
            reference = trial.metric(center)
            root = np.linalg.cholesky(reference)
            relative = np.swapaxes(root, 0, 1) @ G @ root
            comparison = float(np.min(1.0 / np.linalg.eigvalsh(relative)[:, -1]))
            logger.info(
                "Lower-bound metric for %s at %s: adjoined %s, box half-width %.3g, mu_min %.4g, comparison %.4g",
                S.label, tuple(center), adjoined, half, mu_min, comparison,
            )
            return LowerBoundMetric(
                S, tuple(center), adjoined, center - half, center + half, mu_min, reference, comparison
            )
        half *= 0.5
    raise FrameExtensionFailed(
        f"Extended frame of {S.label} degenerates on every box around {tuple(center)}"
    )


def riemannian_distance(bound: LowerBoundMetric, p, q, nodes: int = 16) -> float:
    """
    Geodesic distance of the lower-bound metric between two points of its box,
    by minimizing the discrete path energy.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = p.size
    s = np.linspace(0.0, 1.0, nodes + 1)[1:-1, None]
    x0 = (p + s * (q - p)).ravel()

    def path(z):
        return np.vstack([p, z.reshape(nodes - 1, n), q])

    def energy(z):
        X = path(z)
        dX = np.diff(X, axis=0)
        G = bound.metric(0.5 * (X[1:] + X[:-1]))
        return nodes * float(np.einsum("kj,kjl,kl->", dX, G, dX))

    bounds = [(lo, hi) for _ in range(nodes - 1) for lo, hi in zip(bound.box_lo, bound.box_hi)]
    result = minimize(energy, x0, method="L-BFGS-B", bounds=bounds)
    X = path(result.x)
    dX = np.diff(X, axis=0)
    G = bound.metric(0.5 * (X[1:] + X[:-1]))
    return float(np.sum(np.sqrt(np.einsum("kj,kjl,kl->k", dX, G, dX))))


# ============================================================================
# First-order separation of curves
# ============================================================================

@dataclass(frozen=True)
class SeparationReport:
    times: Tuple[float, ...]
    ratios: Tuple[float, ...]
    target: float
    passed: bool


def first_order_separation_check(
    S: SubRiemannianStructure,
    p: Sequence[float],
    alpha,
    beta,
    t_grid: Sequence[float] = (0.4, 0.2, 0.1, 0.05),
    tol: float = 1e-2,
    distance_opts=None,
) -> SeparationReport:
    """
    Compare d(alpha(t), beta(t)) / t with |alpha'(0) - beta'(0)|_p.

    The liminf is read off as the minimum over the smallest half of the grid.
    """
    from app.geometry.geodesy import cc_distance
    from app.config.settings import DistanceOptions

    distance_opts = distance_opts or DistanceOptions()
    p = np.asarray(p, dtype=float)
    F = S.frame.values(p)
    diff = F @ (alpha.controls[0] - beta.controls[0])
    target = minimal_control(S, p, diff).norm if np.linalg.norm(diff) > 0 else 0.0

    times = sorted(t_grid, reverse=True)
    ratios = []
    for t in times:
        a = alpha.state_at(t)
        b = beta.state_at(t)
        d = cc_distance(S, a, b, distance_opts).upper
        ratios.append(d / t)
        logger.debug("Separation at t=%.4g: ratio %.6f (target %.6f)", t, ratios[-1], target)
    tail = ratios[len(ratios) // 2:]
    passed = min(tail) >= target - tol
    return SeparationReport(tuple(times), tuple(ratios), target, passed)
