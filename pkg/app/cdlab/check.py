"""
Entropy inequality of the CD(K, N) condition along discrete W2 geodesics.

For each t the margin is

    RHS - S_N(mu_t | m),
    RHS = -sum_ij pi_ij [tau^(1-t)(d_ij) rho0(x_i)^(-1/N) + tau^(t)(d_ij) rho1(y_j)^(-1/N)]

and a margin below -(tolerance + budget) counts as a violation. Endpoint
densities are taken from the measures when they carry one and estimated
with the interpolants' KDE otherwise. Either verdict is numerical evidence
only.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.cdlab.backends import DistanceBackend, EuclideanBackend, ShootingBackend
from app.cdlab.distortion import distortion_tau
from app.cdlab.measures import (
    DiscreteMeasure,
    ReferenceDensity,
    estimate_measure,
    grid_block,
    halfplane_density,
    lebesgue_density,
    renyi_entropy,
)
from app.cdlab.transport import TransportPlan, w2_geodesic
from app.config.settings import CDOptions
from app.geometry.library import grushin

logger = logging.getLogger(__name__)

NOTE = "Numerical evidence from a discretized entropy inequality; not a proof in either direction."


@dataclass(frozen=True)
class CDRow:
    t: float
    entropy: float
    rhs: float
    margin: float


@dataclass(frozen=True)
class CDReport:
    K: float
    N: float
    backend: str
    per_t: List[CDRow]
    threshold: float
    plan_cost: float
    label: str = ""
    note: str = field(default=NOTE)

    @property
    def min_margin(self) -> float:
        return min(row.margin for row in self.per_t)

    @property
    def violated(self) -> bool:
        return self.min_margin < -self.threshold

    @property
    def verdict(self) -> str:
        return "violated" if self.violated else "consistent"

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([vars(row) for row in self.per_t])
        df["verdict"] = self.verdict
        return df


def entropy_rhs(
    plan: TransportPlan, rho0: np.ndarray, rho1: np.ndarray, K: float, N: float, t: float
) -> float:
    i, j, mass = plan.pairs()
    theta = plan.distances[i, j]
    tau0 = np.asarray(distortion_tau(K, N, 1.0 - t, theta))
    tau1 = np.asarray(distortion_tau(K, N, t, theta))
    terms = tau0 * rho0[i] ** (-1.0 / N) + tau1 * rho1[j] ** (-1.0 / N)
    return -float(mass @ terms)


def endpoint_density(mu: DiscreteMeasure, reference: ReferenceDensity, opts: CDOptions) -> np.ndarray:
    if mu.has_density:
        return mu.rho
    logger.debug("Endpoint of %d points has no density; using the KDE", mu.size)
    return estimate_measure(mu.points, mu.weights, reference, opts).rho


def cd_inequality_check(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    backend: DistanceBackend,
    reference: ReferenceDensity = lebesgue_density,
    opts: CDOptions = CDOptions(),
    label: str = "",
) -> CDReport:
    K, N = opts.K, opts.N
    plan, interpolants = w2_geodesic(mu0, mu1, backend, opts.times, reference, opts)
    rho0 = endpoint_density(mu0, reference, opts)
    rho1 = endpoint_density(mu1, reference, opts)
    rows = []
    for t, mu_t in zip(opts.times, interpolants):
        entropy = renyi_entropy(mu_t, N)
        rhs = entropy_rhs(plan, rho0, rho1, K, N, t)
        rows.append(CDRow(float(t), entropy, rhs, rhs - entropy))
    report = CDReport(K, N, backend.name, rows, opts.violation_threshold, plan.cost, label)
    logger.info(
        "CD(%g, %g) check %s on %s: min margin %.3e -> %s",
        K, N, label, backend.name, report.min_margin, report.verdict,
    )
    return report


# ============================================================================
# Suites
# ============================================================================

def grushin_configurations(scale: float, per_axis: int = 7) -> List[Tuple[str, DiscreteMeasure, DiscreteMeasure]]:
    """
    Block pairs near the singular line {x = 0} at scale s.

    The first three boxes have half widths (s/4, s^2/4), matching the weights
    (1, 2) of the Grushin dilations. "arch" moves a thin block at x = 0.4 s
    across y: the geodesic midpoints sit at x = B, which barely depends on the
    starting x, so the interpolant at t = 1/2 collapses in x.

    Densities are dropped so that endpoints and interpolants share the KDE.
    """
    s = scale
    half = (s / 4.0, s * s / 4.0)
    thin = (0.2 * s, 0.01 * s * s)
    blocks = [
        ("straddle", (-s, 0.0), (s, 0.0), half),
        ("sheared", (-s, -s * s / 2.0), (s, s * s / 2.0), half),
        ("stacked", (0.0, -s * s), (0.0, s * s), half),
        ("arch", (0.4 * s, -s * s), (0.4 * s, s * s), thin),
    ]
    return [
        (name, grid_block(a, h, per_axis).without_rho(), grid_block(b, h, per_axis).without_rho())
        for name, a, b, h in blocks
    ]


# scale, configuration and grid of the pinned Grushin violation
GRUSHIN_WITNESS = (0.125, "arch", 3)


def grushin_witness(
    opts: CDOptions = CDOptions(), backend: Optional[DistanceBackend] = None
) -> CDReport:
    """Re-run the pinned violating configuration of the Grushin scan."""
    scale, name, per_axis = GRUSHIN_WITNESS
    mu0, mu1 = next((a, b) for n, a, b in grushin_configurations(scale, per_axis) if n == name)
    backend = backend or ShootingBackend(grushin())
    return cd_inequality_check(mu0, mu1, backend, lebesgue_density, opts, f"{name}@{scale:g}")


@dataclass(frozen=True)
class ScanResult:
    table: pd.DataFrame
    reports: List[CDReport]

    @property
    def witness(self) -> Optional[CDReport]:
        """The first violating configuration in scan order, if any."""
        return next((r for r in self.reports if r.violated), None)

    @property
    def verdict(self) -> str:
        return "violated" if self.witness is not None else "no violation found"


def scan_grushin_violation(
    opts: CDOptions = CDOptions(),
    backend: Optional[DistanceBackend] = None,
    per_axis: int = 7,
) -> ScanResult:
    """Run the Grushin configurations over opts.scales with Lebesgue reference."""
    backend = backend or ShootingBackend(grushin())
    jobs = [
        (scale, name, mu0, mu1)
        for scale in opts.scales
        for name, mu0, mu1 in grushin_configurations(scale, per_axis)
    ]
    reports = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(cd_inequality_check)(mu0, mu1, backend, lebesgue_density, opts, f"{name}@{scale:g}")
        for scale, name, mu0, mu1 in jobs
    )
    table = pd.DataFrame(
        {
            "scale": [scale for scale, *_ in jobs],
            "configuration": [name for _, name, *_ in jobs],
            "min_margin": [r.min_margin for r in reports],
            "verdict": [r.verdict for r in reports],
        }
    )
    result = ScanResult(table, reports)
    witness = result.witness
    if witness is None:
        logger.warning("No violation found on the Grushin scan (min margin %.3e)", table["min_margin"].min())
    else:
        logger.info("Grushin violation at %s with margin %.3e", witness.label, witness.min_margin)
    return result


def halfplane_suite(
    opts: CDOptions = CDOptions(),
    backend: Optional[DistanceBackend] = None,
    per_axis: int = 7,
) -> List[CDReport]:
    """
    Grushin halfplane with reference x^p, K = 0 and N = p + 3. Supports stay
    in {x > 0}.
    """
    p = opts.halfplane_p
    run = opts.model_copy(update={"K": 0.0, "N": p + 3.0})
    backend = backend or ShootingBackend(grushin())
    reference = halfplane_density(p)
    half = (0.25, 0.25)
    configurations = [
        ("right", (1.0, 0.0), (2.0, 0.0)),
        ("left", (2.0, 0.5), (1.0, 0.5)),
        ("short", (1.0, -0.5), (1.5, -0.5)),
    ]
    return [
        cd_inequality_check(
            grid_block(a, half, per_axis, reference).without_rho(),
            grid_block(b, half, per_axis, reference).without_rho(),
            backend, reference, run, f"halfplane:{name}",
        )
        for name, a, b in configurations
    ]


def euclidean_suite(opts: CDOptions = CDOptions(), per_axis: int = 7) -> List[CDReport]:
    """Lebesgue R^2 with K = 0: the control for estimator artifacts."""
    run = opts.model_copy(update={"K": 0.0})
    backend = EuclideanBackend()
    configurations = [
        ("translate", (0.0, 0.0), 0.5, (2.0, 1.0), 0.5),
        ("expand", (0.0, 0.0), 0.25, (0.0, 0.0), 1.0),
        ("translate_expand", (0.0, 0.0), 0.5, (3.0, -1.0), 1.5),
    ]
    return [
        cd_inequality_check(
            grid_block(a, ra, per_axis).without_rho(), grid_block(b, rb, per_axis).without_rho(),
            backend, lebesgue_density, run, f"euclidean:{name}",
        )
        for name, a, ra, b, rb in configurations
    ]
