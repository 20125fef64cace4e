"""
Fixed-step RK4 integration of admissible curves and of the normal
Hamiltonian flow H(x, lam) = 1/2 sum_i <lam, X_i(x)>^2.

All kernels are batched over a leading axis so shooting can advance many
trajectories at once.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np

from app.algebra.compiled import CompiledFrame
from app.errors import ArgumentError, DimensionError, DomainEscape
from app.geometry.curves import ControlCurve

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 1000


def _check_box(x: np.ndarray, box, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainEscape(f"Trajectory became non-finite at t={t:.6g}")
    if box is not None:
        lo, hi = box
        if np.any(x < lo) or np.any(x > hi):
            raise DomainEscape(f"Trajectory left the coordinate box at t={t:.6g}")


def rk4_control_step(frame: CompiledFrame, x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """One RK4 step of x' = F(x) u with u frozen over the step."""
    k1 = frame.apply(x, u)
    k2 = frame.apply(x + 0.5 * h * k1, u)
    k3 = frame.apply(x + 0.5 * h * k2, u)
    k4 = frame.apply(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_piecewise(
    frame: CompiledFrame,
    p0,
    controls: np.ndarray,
    durations: np.ndarray,
    substeps: int,
    box=None,
) -> ControlCurve:
    """
    Integrate piecewise-constant controls segment by segment.

    Args:
        frame: compiled generators
        p0: start point
        controls: (N, m) control per segment
        durations: (N,) positive segment durations
        substeps: RK4 steps per segment
        box: optional (lo, hi) arrays bounding the trajectory
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    durations = np.asarray(durations, dtype=float)
    if controls.shape[1] != frame.m:
        raise DimensionError(f"Controls have {controls.shape[1]} columns, frame has {frame.m}")
    if np.any(durations <= 0):
        raise ArgumentError("Segment durations must be positive")

    x = np.asarray(p0, dtype=float).copy()
    times = [0.0]
    states = [x.copy()]
    ctrl_rows = []
    t = 0.0
    for u, dt in zip(controls, durations):
        h = dt / substeps
        for _ in range(substeps):
            x = rk4_control_step(frame, x, u, h)
            t += h
            _check_box(x, box, t)
            times.append(t)
            states.append(x.copy())
            ctrl_rows.append(u)
    ctrl_rows.append(controls[-1])
    return ControlCurve(np.asarray(times), np.asarray(states), np.asarray(ctrl_rows))


def substeps_for(segments: int, steps: Optional[int] = None) -> int:
    """Substeps per segment so that the total step count is at least `steps`."""
    return max(1, math.ceil((steps or DEFAULT_STEPS) / segments))


# ============================================================================
# Hamiltonian flow
# ============================================================================

def hamiltonian(frame: CompiledFrame, x, lam) -> np.ndarray:
    h = np.einsum("...j,...jm->...m", np.asarray(lam, float), frame.values(x))
    return 0.5 * np.sum(h * h, axis=-1)


def hamiltonian_rhs(frame: CompiledFrame, x: np.ndarray, lam: np.ndarray) -> Tuple[np.ndarray, ...]:
    """
    Hamilton's equations for H = 1/2 sum_i <lam, X_i>^2.

    Returns:
        (x_dot, lam_dot, h) with h_i = <lam, X_i(x)> the normal control
    """
    F = frame.values(x)
    J = frame.jacobians(x)
    h = np.einsum("...j,...jm->...m", lam, F)
    x_dot = np.einsum("...jm,...m->...j", F, h)
    lam_dot = -np.einsum("...m,...j,...jkm->...k", h, lam, J)
    return x_dot, lam_dot, h


def flow_hamiltonian(
    frame: CompiledFrame,
    x0: np.ndarray,
    lam0: np.ndarray,
    T: float,
    steps: int,
    record: bool = False,
):
    """
    RK4 flow of the Hamiltonian system from (x0, lam0) for time T.

    Works on single points (n,) or batches (B, n). Non-finite trajectories
    are left as NaN/inf; callers decide how to treat them.

    Returns:
        (x_T, lam_T) or, with record=True, (xs, lams, hs) stacked over steps+1
    """
    x = np.asarray(x0, dtype=float).copy()
    lam = np.asarray(lam0, dtype=float).copy()
    h = T / steps
    if record:
        xs, lams, hs = [x.copy()], [lam.copy()], []
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            a1, b1, c1 = hamiltonian_rhs(frame, x, lam)
            a2, b2, _ = hamiltonian_rhs(frame, x + 0.5 * h * a1, lam + 0.5 * h * b1)
            a3, b3, _ = hamiltonian_rhs(frame, x + 0.5 * h * a2, lam + 0.5 * h * b2)
            a4, b4, _ = hamiltonian_rhs(frame, x + h * a3, lam + h * b3)
            x = x + (h / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
            lam = lam + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
            if record:
                xs.append(x.copy())
                lams.append(lam.copy())
                hs.append(c1)
    if not record:
        return x, lam
    _, _, h_last = hamiltonian_rhs(frame, x, lam)
    hs.append(h_last)
    return np.stack(xs), np.stack(lams), np.stack(hs)
