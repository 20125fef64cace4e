"""
Finite-difference Ricci curvature of a metric given as a function of
coordinates.

First and second derivatives of g come from central differences at steps
h and h/2 combined by Richardson extrapolation; Christoffel symbols and
their derivatives are then assembled exactly from those.
"""

import logging
from typing import Callable, Dict

import numpy as np

from app.errors import ArgumentError, OracleConditioning
from app.warped.warping import COMPONENTS, WarpingTriple, ricci_components

logger = logging.getLogger(__name__)

MetricFn = Callable[[np.ndarray], np.ndarray]

_COND_LIMIT = 1e12


def _derivatives(metric: MetricFn, p: np.ndarray, h: float):
    n = p.size
    eye = np.eye(n)
    dg = np.empty((n, n, n))
    ddg = np.empty((n, n, n, n))
    for a in range(n):
        dg[a] = (metric(p + h * eye[a]) - metric(p - h * eye[a])) / (2.0 * h)
        for b in range(a, n):
            ea, eb = h * eye[a], h * eye[b]
            val = (
                metric(p + ea + eb) - metric(p + ea - eb) - metric(p - ea + eb) + metric(p - ea - eb)
            ) / (4.0 * h * h)
            ddg[a, b] = val
            ddg[b, a] = val
    return dg, ddg


def christoffel(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Gamma^a_bc from dg[c, i, j] = d_c g_ij."""
    lowered = np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg
    return 0.5 * np.einsum("ad,dbc->abc", g_inv, lowered)


def curvature_oracle(metric: MetricFn, p, h: float = 1e-4) -> np.ndarray:
    """
    Ricci tensor R_bc at p.

    Raises:
        OracleConditioning: if g(p) is numerically singular
    """
    p = np.asarray(p, dtype=float)
    if h <= 0:
        raise ArgumentError(f"Finite-difference step must be positive, got {h}")
    g = np.asarray(metric(p), dtype=float)
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise OracleConditioning(f"Metric condition number {cond:.3g} at {p.tolist()}")
    g_inv = np.linalg.inv(g)

    coarse = _derivatives(metric, p, h)
    fine = _derivatives(metric, p, 0.5 * h)
    dg = (4.0 * fine[0] - coarse[0]) / 3.0
    ddg = (4.0 * fine[1] - coarse[1]) / 3.0

    gamma = christoffel(g_inv, dg)
    # d_e g^-1 = -g^-1 (d_e g) g^-1
    dg_inv = -np.einsum("ai,eij,jd->ead", g_inv, dg, g_inv)
    # lowered[d, b, c] = d_b g_dc + d_c g_db - d_d g_bc
    lowered = np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg
    d_lowered = (
        np.einsum("ebdc->edbc", ddg) + np.einsum("ecdb->edbc", ddg) - ddg
    )
    # dgamma[e, a, b, c] = d_e Gamma^a_bc
    dgamma = 0.5 * (
        np.einsum("ead,dbc->eabc", dg_inv, lowered) + np.einsum("ad,edbc->eabc", g_inv, d_lowered)
    )
    ricci = (
        np.einsum("aabc->bc", dgamma)
        - np.einsum("caba->bc", dgamma)
        + np.einsum("aad,dbc->bc", gamma, gamma)
        - np.einsum("acd,dba->bc", gamma, gamma)
    )
    return 0.5 * (ricci + ricci.T)


# ============================================================================
# Test metrics
# ============================================================================

def euclidean_metric(n: int) -> MetricFn:
    return lambda p: np.eye(n)


def round_sphere_factors(angles: np.ndarray) -> np.ndarray:
    """Diagonal of the unit round metric on S^d in hyperspherical angles."""
    d = angles.size
    out = np.ones(d)
    for i in range(1, d):
        out[i] = out[i - 1] * np.sin(angles[i - 1]) ** 2
    return out


def round_sphere_metric(d: int = 2, radius: float = 1.0) -> MetricFn:
    def metric(p):
        return radius**2 * np.diag(round_sphere_factors(np.asarray(p, float)))

    return metric


def warped_product_metric(W: WarpingTriple) -> MetricFn:
    """
    The metric of W in coordinates (r, S^m angles, S^k angles, circle angle),
    a diagonal matrix of size m + k + 2.
    """
    m, k = W.m, W.k

    def metric(p):
        p = np.asarray(p, dtype=float)
        r = p[0]
        f = float(W.evaluate("f", r))
        g = float(W.evaluate("g", r))
        h = float(W.evaluate("h", r))
        diag = np.concatenate(
            [
                [1.0],
                f * f * round_sphere_factors(p[1:1 + m]),
                g * g * round_sphere_factors(p[1 + m:1 + m + k]),
                [h * h],
            ]
        )
        return np.diag(diag)

    return metric


def oracle_components(W: WarpingTriple, r: float, h: float = 1e-4) -> Dict[str, float]:
    """
    The four unit-direction Ricci components from the oracle, at a point
    with all sphere angles pi / 2.
    """
    m, k = W.m, W.k
    p = np.concatenate([[r], np.full(m + k, 0.5 * np.pi), [0.0]])
    metric = warped_product_metric(W)
    ric = curvature_oracle(metric, p, h)
    g = np.diag(metric(p))
    idx = {"ric_rr": 0, "ric_xx": 1, "ric_yy": 1 + m, "ric_zz": 1 + m + k}
    return {name: float(ric[i, i] / g[i]) for name, i in idx.items()}


def compare_ricci(W: WarpingTriple, r: float, h: float = 1e-4) -> Dict[str, float]:
    """Relative error of the closed-form components against the oracle."""
    oracle = oracle_components(W, r, h)
    closed = dict(zip(COMPONENTS, (float(v) for v in ricci_components(W, r))))
    errors = {
        name: abs(closed[name] - oracle[name]) / max(abs(oracle[name]), 1e-12) for name in COMPONENTS
    }
    logger.debug("Ricci comparison at r=%g: %s", r, errors)
    return errors
