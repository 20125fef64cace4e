"""
Cone-Grushin spaces: the completion of dr^2 + (c r)^2 ds_k^2 + r^(-2 alpha) dy^2
on R^(k+1) x R minus the axis C = {x = 0}.

Distances are computed in the reduced model obtained from rotational
symmetry. The sphere factor collapses to one angle phi, and psi = c phi
unfolds the cone, so the metric becomes |du|^2 + |u|^(-2 alpha) dy^2 with u
in the plane. Paths are discretized with M segments, kept at radius >= eps
by bounds, and optimized for a decreasing sequence of eps with warm starts.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.optimize import minimize
from sklearn.linear_model import LinearRegression

from app.config.settings import ConeOptions
from app.errors import ArgumentError, DimensionError, EstimateFailed
from app.geometry.library import cone_grushin_frame
from app.geometry.structure import flag_at
from app.warped.warping import axis_constant

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConeGrushinSpace:
    k: int
    alpha: float
    c: float = 0.5

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ArgumentError(f"k must be an integer >= 2, got {self.k}")
        if not self.alpha > 0:
            raise ArgumentError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.c < 1:
            raise ArgumentError(f"c must lie in (0, 1), got {self.c}")

    @property
    def n(self) -> int:
        return self.k + 2

    @property
    def axis_constant(self) -> float:
        return axis_constant(self.alpha)

    def point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n,):
            raise DimensionError(f"Point of shape {p.shape} in a cone-Grushin space of dim {self.n}")
        return p

    def axis_point(self, y: float) -> np.ndarray:
        p = np.zeros(self.n)
        p[-1] = y
        return p


def cone_dilate(space: ConeGrushinSpace, lam: float, p) -> np.ndarray:
    """(x, y) -> (lam x, lam^(1 + alpha) y)."""
    if not lam > 0:
        raise ArgumentError(f"Dilation factor must be positive, got {lam}")
    p = space.point(p).copy()
    p[:-1] *= lam
    p[-1] *= lam ** (1.0 + space.alpha)
    return p


# ============================================================================
# Reduced model
# ============================================================================

@dataclass(frozen=True)
class ReducedPair:
    """Endpoints in (r, psi, y) plus the plane that maps the path back to R^(k+2)."""

    r0: float
    r1: float
    dpsi: float
    y0: float
    y1: float
    e0: np.ndarray
    e1: np.ndarray


def reduce_pair(space: ConeGrushinSpace, p, q) -> ReducedPair:
    p, q = space.point(p), space.point(q)
    xp, xq = p[:-1], q[:-1]
    rp, rq = float(np.linalg.norm(xp)), float(np.linalg.norm(xq))
    e0 = xp / rp if rp > 0 else (xq / rq if rq > 0 else np.eye(space.k + 1)[0])
    phi = 0.0
    e1 = np.roll(e0, 1)
    if rp > 0 and rq > 0:
        cosine = float(np.clip(xp @ xq / (rp * rq), -1.0, 1.0))
        phi = float(np.arccos(cosine))
        perp = xq / rq - cosine * e0
        if np.linalg.norm(perp) > 1e-14:
            e1 = perp / np.linalg.norm(perp)
    e1 = e1 - (e1 @ e0) * e0
    e1 /= np.linalg.norm(e1)
    return ReducedPair(rp, rq, space.c * phi, float(p[-1]), float(q[-1]), e0, e1)


@dataclass(frozen=True)
class ConePath:
    """Nodes (r, psi, y) of a discretized path in the reduced model."""

    nodes: np.ndarray
    alpha: float

    def segments(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(chord lengths, midpoint radii, y increments) per segment."""
        r, psi, y = self.nodes.T
        chord2 = r[:-1] ** 2 + r[1:] ** 2 - 2.0 * r[:-1] * r[1:] * np.cos(np.diff(psi))
        return np.sqrt(np.maximum(chord2, 0.0)), 0.5 * (r[:-1] + r[1:]), np.diff(y)

    def segment_lengths(self) -> np.ndarray:
        chord, rho, dy = self.segments()
        with np.errstate(divide="ignore", invalid="ignore"):
            vertical = np.where(dy == 0.0, 0.0, rho ** (-2.0 * self.alpha) * dy * dy)
        return np.sqrt(chord * chord + vertical)

    @property
    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    @property
    def min_radius(self) -> float:
        r = self.nodes[1:-1, 0]
        return float(np.min(r)) if r.size else float(np.min(self.nodes[:, 0]))

    def to_points(self, space: ConeGrushinSpace, pair: ReducedPair) -> np.ndarray:
        r, psi, y = self.nodes.T
        phi = psi / space.c
        x = r[:, None] * (np.cos(phi)[:, None] * pair.e0 + np.sin(phi)[:, None] * pair.e1)
        return np.column_stack([x, y])

    @classmethod
    def straight(cls, space: ConeGrushinSpace, p, q, segments: int = 64) -> "ConePath":
        """The reduced image of the coordinate segment from p to q."""
        pts = space.point(p) + np.linspace(0.0, 1.0, segments + 1)[:, None] * (space.point(q) - space.point(p))
        pair = reduce_pair(space, p, q)
        x = pts[:, :-1]
        r = np.linalg.norm(x, axis=1)
        phi = np.arctan2(x @ pair.e1, x @ pair.e0)
        return cls(np.column_stack([r, space.c * phi, pts[:, -1]]), space.alpha)


class _BarrierProblem:
    """Discrete energy M sum s_i^2 over interior nodes, r >= eps."""

    def __init__(self, pair: ReducedPair, alpha: float, segments: int):
        self.pair = pair
        self.alpha = alpha
        self.M = segments

    def nodes(self, z: np.ndarray) -> np.ndarray:
        inner = z.reshape(3, self.M - 1)
        r = np.concatenate([[self.pair.r0], inner[0], [self.pair.r1]])
        psi = np.concatenate([[0.0], inner[1], [self.pair.dpsi]])
        y = np.concatenate([[self.pair.y0], inner[2], [self.pair.y1]])
        return np.column_stack([r, psi, y])

    def __call__(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        X = self.nodes(z)
        r, psi, y = X.T
        a = self.alpha
        dpsi = np.diff(psi)
        dy = np.diff(y)
        cos, sin = np.cos(dpsi), np.sin(dpsi)
        rho = np.maximum(0.5 * (r[:-1] + r[1:]), 1e-300)
        w = rho ** (-2.0 * a)
        s2 = r[:-1] ** 2 + r[1:] ** 2 - 2.0 * r[:-1] * r[1:] * cos + w * dy * dy
        value = self.M * float(np.sum(s2))

        dw = -a * rho ** (-2.0 * a - 1.0) * dy * dy
        g_r = np.zeros_like(r)
        g_r[:-1] += 2.0 * r[:-1] - 2.0 * r[1:] * cos + dw
        g_r[1:] += 2.0 * r[1:] - 2.0 * r[:-1] * cos + dw
        g_psi = np.zeros_like(psi)
        t = 2.0 * r[:-1] * r[1:] * sin
        g_psi[1:] += t
        g_psi[:-1] -= t
        g_y = np.zeros_like(y)
        t = 2.0 * w * dy
        g_y[1:] += t
        g_y[:-1] -= t
        grad = self.M * np.concatenate([g_r[1:-1], g_psi[1:-1], g_y[1:-1]])
        return value, grad

    def pack(self, nodes: np.ndarray) -> np.ndarray:
        return nodes[1:-1].T.ravel()


def _initial_paths(pair: ReducedPair, alpha: float, M: int, starts: int, eps: float, rng) -> List[np.ndarray]:
    s = np.linspace(0.0, 1.0, M + 1)
    P = np.array([pair.r0, 0.0])
    Q = np.array([pair.r1 * np.cos(pair.dpsi), pair.r1 * np.sin(pair.dpsi)])
    u = P + s[:, None] * (Q - P)
    y = pair.y0 + s * (pair.y1 - pair.y0)
    r = np.linalg.norm(u, axis=1)
    psi = np.unwrap(np.arctan2(u[:, 1], u[:, 0]))
    psi[0], psi[-1] = 0.0, pair.dpsi
    scale = max(abs(pair.y1 - pair.y0) ** (1.0 / (1.0 + alpha)), float(np.linalg.norm(Q - P)), 1e-6)
    bump = np.sin(np.pi * s)
    paths = []
    for j in range(starts):
        amp = 0.0 if j == 0 else scale * 2.0 ** (j - 2) * rng.uniform(0.8, 1.2)
        rr = r + amp * bump
        rr[1:-1] = np.maximum(rr[1:-1], eps)
        paths.append(np.column_stack([rr, psi, y]))
    return paths


def _optimize(problem: _BarrierProblem, nodes: np.ndarray, eps: float, maxiter: int):
    z0 = problem.pack(nodes)
    z0[: problem.M - 1] = np.maximum(z0[: problem.M - 1], eps)
    bounds = [(eps, None)] * (problem.M - 1) + [(None, None)] * (2 * (problem.M - 1))
    res = minimize(
        problem, z0, jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-11},
    )
    return problem.nodes(res.x), res.status != 1 and bool(np.isfinite(res.fun))


@dataclass(frozen=True)
class ConeDistance:
    """
    Barrier estimates of d(p, q).

    Attributes:
        upper: length of the best path at the smallest eps (monotone envelope)
        extrapolated: Richardson estimate of the eps -> 0 limit
        lengths: envelope lengths per eps
        min_radii: smallest interior radius of the optimized path per eps
        path: certificate path at the smallest eps
        verdict: "avoids" if the min radius stays above the barrier, else "touches"
    """

    upper: float
    extrapolated: float
    epsilons: Tuple[float, ...]
    lengths: Tuple[float, ...]
    min_radii: Tuple[float, ...]
    path: ConePath
    converged: bool
    verdict: str

    @property
    def value(self) -> float:
        return self.extrapolated


def cone_grushin_distance(
    space: ConeGrushinSpace, p, q, opts: ConeOptions = ConeOptions()
) -> ConeDistance:
    pair = reduce_pair(space, p, q)
    M = opts.nodes
    epsilons = tuple(sorted(opts.epsilons, reverse=True))
    if np.array_equal(space.point(p), space.point(q)):
        path = ConePath(np.tile([pair.r0, 0.0, pair.y0], (M + 1, 1)), space.alpha)
        zeros = tuple(0.0 for _ in epsilons)
        return ConeDistance(0.0, 0.0, epsilons, zeros, tuple(pair.r0 for _ in epsilons), path, True, "avoids")

    problem = _BarrierProblem(pair, space.alpha, M)
    rng = np.random.default_rng(opts.seed)
    starts = _initial_paths(pair, space.alpha, M, opts.starts, epsilons[0], rng)

    results = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(_optimize)(problem, nodes, epsilons[0], opts.maxiter) for nodes in starts
    )
    best, ok = min(results, key=lambda item: ConePath(item[0], space.alpha).length)
    converged = ok
    paths = [ConePath(best, space.alpha)]
    for eps in epsilons[1:]:
        nodes, ok = _optimize(problem, paths[-1].nodes, eps, opts.maxiter)
        converged = converged and ok
        candidate = ConePath(nodes, space.alpha)
        paths.append(candidate if candidate.length <= paths[-1].length else paths[-1])

    lengths = tuple(path.length for path in paths)
    radii = tuple(path.min_radius for path in paths)
    if len(lengths) >= 2:
        e2, e3 = epsilons[-2], epsilons[-1]
        d2, d3 = lengths[-2], lengths[-1]
        extrapolated = max(0.0, d3 - (d2 - d3) * e3 / (e2 - e3))
    else:
        extrapolated = lengths[-1]
    verdict = "avoids" if radii[-1] > 10.0 * epsilons[-1] else "touches"
    logger.debug(
        "Cone distance %s -> %s: lengths %s, min radii %s (%s)",
        np.round(p, 6).tolist(), np.round(q, 6).tolist(), lengths, radii, verdict,
    )
    return ConeDistance(lengths[-1], extrapolated, epsilons, lengths, radii, paths[-1], converged, verdict)


# ============================================================================
# Checks
# ============================================================================

def random_pairs(space: ConeGrushinSpace, count: int, rng: np.random.Generator) -> List[Tuple[np.ndarray, np.ndarray]]:
    return [
        (rng.uniform(-1.0, 1.0, space.n), rng.uniform(-1.0, 1.0, space.n)) for _ in range(count)
    ]


@dataclass(frozen=True)
class DilationReport:
    table: pd.DataFrame
    tolerance: float

    @property
    def max_error(self) -> float:
        return float(self.table["rel_error"].max()) if len(self.table) else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def dilation_isometry_check(
    space: ConeGrushinSpace,
    pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
    lambdas: Sequence[float],
    opts: ConeOptions = ConeOptions(),
    tol: float = 1e-2,
) -> DilationReport:
    """|d(delta p, delta q) - lam d(p, q)| / (lam d(p, q)) per pair and lam."""
    serial = opts.model_copy(update={"threads": 1})
    base = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(cone_grushin_distance)(space, p, q, serial) for p, q in pairs
    )
    jobs = [(i, lam) for lam in lambdas for i in range(len(pairs))]
    scaled = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(cone_grushin_distance)(
            space, cone_dilate(space, lam, pairs[i][0]), cone_dilate(space, lam, pairs[i][1]), serial
        )
        for i, lam in jobs
    )
    rows = []
    for (i, lam), est in zip(jobs, scaled):
        d = base[i].value
        rows.append(
            {
                "lambda": float(lam),
                "pair": i,
                "d": d,
                "d_dilated": est.value,
                "rel_error": abs(est.value - lam * d) / max(lam * d, 1e-300),
            }
        )
    report = DilationReport(pd.DataFrame(rows), tol)
    logger.info("Dilation isometry check: max relative error %.3e", report.max_error)
    return report


@dataclass(frozen=True)
class ScalingFit:
    """log d((0,0),(0,y)) against log |y|: slope should be 1 / (1 + alpha)."""

    table: pd.DataFrame
    slope: float
    c_tilde: float


def _fit(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    if len(x) < 2 or np.ptp(x) == 0 or not np.all(np.isfinite(y)):
        raise EstimateFailed("Regression needs at least two distinct finite points")
    model = LinearRegression().fit(x.reshape(-1, 1), y)
    return float(model.coef_[0]), float(model.intercept_)


def axis_scaling_fit(
    space: ConeGrushinSpace, ys: Sequence[float] = (1 / 16, 1 / 4, 4.0, 16.0), opts: ConeOptions = ConeOptions()
) -> ScalingFit:
    origin = space.axis_point(0.0)
    distances = [cone_grushin_distance(space, origin, space.axis_point(y), opts).value for y in ys]
    log_y = np.log(np.abs(np.asarray(ys, float)))
    log_d = np.log(np.asarray(distances))
    slope, intercept = _fit(log_y, log_d)
    table = pd.DataFrame({"y": ys, "distance": distances, "log_y": log_y, "log_d": log_d})
    return ScalingFit(table, slope, float(np.exp(intercept)))


@dataclass(frozen=True)
class HausdorffFit:
    table: pd.DataFrame
    slope: float
    intercept: float
    expected: float

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.expected) / self.expected


def hausdorff_dimension_estimate(
    space: ConeGrushinSpace, exponents: Sequence[int] = tuple(range(3, 11))
) -> HausdorffFit:
    """
    Covering numbers of C n {|y| <= 1} at radii delta = 2^-j.

    Along C, d((0, y), (0, y')) = c~ |y - y'|^(1 / (1 + alpha)), so a ball of
    radius delta covers a y-interval of length (delta / c~)^(1 + alpha) and
    N(delta) = ceil(2 / length). The slope of log N against log(1 / delta) is
    the estimate.
    """
    c_tilde = space.axis_constant
    deltas = np.array([2.0 ** (-j) for j in exponents])
    ell = (deltas / c_tilde) ** (1.0 + space.alpha)
    counts = np.ceil(2.0 / ell)
    x = np.log(1.0 / deltas)
    y = np.log(counts)
    slope, intercept = _fit(x, y)
    table = pd.DataFrame({"delta": deltas, "log_inv_delta": x, "log_n": y})
    table["slope"] = slope
    logger.info("Hausdorff estimate for alpha=%g: %.4f (expected %.4f)", space.alpha, slope, 1 + space.alpha)
    return HausdorffFit(table, slope, intercept, 1.0 + space.alpha)


@dataclass(frozen=True)
class HorizontalReport:
    max_excess: float
    passed: bool
    growth: Tuple[int, ...]


def horizontal_distribution_check(
    space: ConeGrushinSpace, paths: Sequence[ConePath], tol: float = 1e-6, y: float = 0.0
) -> HorizontalReport:
    """
    |dy| <= r^alpha |d gamma|_g on every segment of every path, plus the flag
    of the frame {d/dx_1 .. d/dx_(k+1), r^2 d/dy} at the axis point (0, y).
    """
    excess = -np.inf
    for path in paths:
        _, rho, dy = path.segments()
        bound = rho ** space.alpha * path.segment_lengths()
        excess = max(excess, float(np.max(np.abs(dy) - bound)))
    growth = flag_at(cone_grushin_frame(space.k), list(space.axis_point(y))).growth
    return HorizontalReport(excess, excess <= tol, growth)


# ============================================================================
# Full model spot check
# ============================================================================

def full_model_distance(
    space: ConeGrushinSpace,
    p,
    q,
    segments: int = 32,
    seed: int = 0,
    maxiter: int = 4000,
    perturbation: float = 0.1,
) -> float:
    """
    Path-energy distance in Cartesian coordinates (x, y) of R^(k+2), with the
    cone metric evaluated at segment midpoints. Paths start off the plane of
    p, q and the axis, so agreement with the reduced model supports the
    symmetry reduction. Intended for points away from C.
    """
    p, q = space.point(p), space.point(q)
    n, c, a = space.n, space.c, space.alpha
    rng = np.random.default_rng(seed)
    s = np.linspace(0.0, 1.0, segments + 1)[:, None]
    line = p + s * (q - p)
    line[1:-1] += perturbation * np.sin(np.pi * s[1:-1]) * rng.normal(size=(segments - 1, n))

    def nodes(z):
        return np.vstack([p, z.reshape(segments - 1, n), q])

    def lengths(X):
        d = np.diff(X, axis=0)
        mid = 0.5 * (X[1:] + X[:-1])
        dx, dy = d[:, :-1], d[:, -1]
        rho = np.maximum(np.linalg.norm(mid[:, :-1], axis=1), 1e-12)
        radial = np.einsum("ij,ij->i", dx, mid[:, :-1]) / rho
        tangential = np.maximum(np.einsum("ij,ij->i", dx, dx) - radial**2, 0.0)
        return radial**2 + c * c * tangential + rho ** (-2.0 * a) * dy * dy

    res = minimize(lambda z: segments * float(np.sum(lengths(nodes(z)))), line[1:-1].ravel(),
                   method="L-BFGS-B", options={"maxiter": maxiter})
    return float(np.sum(np.sqrt(lengths(nodes(res.x)))))
