"""
Shooting for normal geodesics.

The unknown is the initial covector lam0 at p; the residual is the
endpoint of the Hamiltonian flow at T = 1 minus the target q. Many pairs
and many starting covectors are solved together by a batched damped Newton
iteration with finite-difference Jacobians. A single pair can additionally
be polished with scipy.optimize.root.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import root

from app.algebra.compiled import CompiledFrame
from app.config.settings import ShootingOptions
from app.errors import HormanderUndecided
from app.geometry.integrate import flow_hamiltonian, hamiltonian

logger = logging.getLogger(__name__)

_FD_EPS = 1e-7
_BACKTRACK = (1.0, 0.5, 0.25, 0.125)


@dataclass(frozen=True)
class ShootingBatch:
    """
    Best normal geodesic per pair.

    Attributes:
        lam0: (B, n) initial covectors
        lengths: (B,) lengths sqrt(2 H) of the unit-time geodesics
        residuals: (B,) endpoint errors
        converged: (B,) residual within tolerance
    """

    lam0: np.ndarray
    lengths: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray


def origin_weights(S) -> np.ndarray:
    """Weights of the flag at the origin, or all ones if it is undecided."""
    from app.geometry.structure import flag_at

    try:
        return np.asarray(flag_at(S, [0.0] * S.dim).weights.weights, dtype=float)
    except HormanderUndecided:
        return np.ones(S.dim)


def initial_covectors(
    p: np.ndarray, q: np.ndarray, weights: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Starting covectors scaled by the homogeneity of the flow.

    Under dilations a unit-time geodesic of length L has lam_j ~ L^(2 - w_j).
    Start 0 is the rescaled displacement; the rest perturb the weight-one
    components and draw the higher ones as frequencies in (-2 pi, 2 pi).
    """
    delta = q - p
    L = max(float(np.sum(np.abs(delta) ** (1.0 / weights))), 1e-12)
    scale = L ** (2.0 - weights)
    starts = np.empty((count, p.size))
    starts[0] = delta * L ** (2.0 - 2.0 * weights)
    low = weights == 1
    for s in range(1, count):
        sigma = np.where(
            low,
            delta / L + rng.normal(0.0, 0.7, p.size),
            rng.uniform(-2.0 * np.pi, 2.0 * np.pi, p.size),
        )
        starts[s] = scale * sigma
    return starts


def _endpoint_residual(frame, P, Lam, Q, steps) -> np.ndarray:
    X, _ = flow_hamiltonian(frame, P, Lam, 1.0, steps)
    R = X - Q
    R[~np.all(np.isfinite(R), axis=-1)] = np.inf
    return R


def _newton(frame: CompiledFrame, P, Q, Lam, opts: ShootingOptions):
    """Batched damped Newton; returns (Lam, residual norms)."""
    Lam = Lam.copy()
    R = _endpoint_residual(frame, P, Lam, Q, opts.steps)
    res = np.linalg.norm(R, axis=1)
    tol = opts.tol * (1.0 + np.linalg.norm(Q - P, axis=1))
    stalled = np.zeros(len(Lam), dtype=bool)

    for it in range(opts.max_iter):
        active = np.isfinite(res) & (res > tol) & ~stalled
        if not active.any():
            break
        idx = np.flatnonzero(active)
        L_a, P_a, Q_a, R_a = Lam[idx], P[idx], Q[idx], R[idx]
        n = L_a.shape[1]

        eps = _FD_EPS * (1.0 + np.abs(L_a))
        J = np.empty((len(idx), n, n))
        for k in range(n):
            shifted = L_a.copy()
            shifted[:, k] += eps[:, k]
            J[:, :, k] = (_endpoint_residual(frame, P_a, shifted, Q_a, opts.steps) - R_a) / eps[:, k, None]
        J[~np.isfinite(J)] = 0.0
        delta = -np.einsum("bij,bj->bi", np.linalg.pinv(J), R_a)

        cap = opts.max_step * (1.0 + np.linalg.norm(L_a, axis=1))
        norm = np.linalg.norm(delta, axis=1)
        delta *= np.minimum(1.0, cap / np.maximum(norm, 1e-300))[:, None]

        accepted = np.zeros(len(idx), dtype=bool)
        for alpha in _BACKTRACK:
            todo = np.flatnonzero(~accepted)
            if todo.size == 0:
                break
            trial = L_a[todo] + alpha * delta[todo]
            R_t = _endpoint_residual(frame, P_a[todo], trial, Q_a[todo], opts.steps)
            r_t = np.linalg.norm(R_t, axis=1)
            better = r_t < res[idx[todo]]
            gain = todo[better]
            Lam[idx[gain]] = trial[better]
            R[idx[gain]] = R_t[better]
            res[idx[gain]] = r_t[better]
            accepted[gain] = True
        stalled[idx[~accepted]] = True
        logger.debug("Newton iteration %d: %d active, %d converged", it, len(idx), int(np.sum(res <= tol)))

    return Lam, res, res <= tol


def shoot_many(
    S,
    P,
    Q,
    opts: ShootingOptions = ShootingOptions(),
    weights: Optional[Sequence[float]] = None,
) -> ShootingBatch:
    """
    Shoot normal geodesics for many pairs (P[b] -> Q[b]).

    A first round uses a quarter of the starts per pair; pairs still
    unconverged get the full start budget. Among converged starts the
    shortest geodesic wins.
    """
    frame = S.frame
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    B, n = P.shape
    w = np.asarray(weights, float) if weights is not None else origin_weights(S)
    rng = np.random.default_rng(opts.seed)
    starts = np.stack([initial_covectors(P[b], Q[b], w, opts.starts, rng) for b in range(B)])

    best_lam = np.zeros((B, n))
    best_len = np.full(B, np.inf)
    best_res = np.full(B, np.inf)
    converged = np.zeros(B, dtype=bool)
    same = np.all(P == Q, axis=1)
    best_len[same] = 0.0
    best_res[same] = 0.0
    converged[same] = True

    first = max(1, opts.starts // 4)
    for lo, hi in ((0, first), (first, opts.starts)):
        pending = np.flatnonzero(~converged)
        if pending.size == 0 or hi <= lo:
            continue
        k = hi - lo
        Lam0 = starts[pending, lo:hi].reshape(-1, n)
        P_rep = np.repeat(P[pending], k, axis=0)
        Q_rep = np.repeat(Q[pending], k, axis=0)
        Lam, res, ok = _newton(frame, P_rep, Q_rep, Lam0, opts)
        lengths = np.sqrt(2.0 * hamiltonian(frame, P_rep, Lam))
        lengths = np.where(ok, lengths, np.inf).reshape(len(pending), k)
        res = res.reshape(len(pending), k)
        Lam = Lam.reshape(len(pending), k, n)
        for row, b in enumerate(pending):
            j = int(np.argmin(lengths[row]))
            if np.isfinite(lengths[row, j]):
                best_lam[b], best_len[b], best_res[b] = Lam[row, j], lengths[row, j], res[row, j]
                converged[b] = True
            else:
                j = int(np.argmin(res[row]))
                if res[row, j] < best_res[b]:
                    best_lam[b], best_res[b] = Lam[row, j], res[row, j]
        logger.info("Shooting round: %d of %d pairs converged", int(converged.sum()), B)

    return ShootingBatch(best_lam, best_len, best_res, converged)


def shoot(S, p, q, opts: ShootingOptions = ShootingOptions(), weights=None):
    """
    Shortest normal geodesic from p to q found by shooting.

    The batched Newton result is polished with scipy.optimize.root (hybr).

    Returns:
        (lam0, length, converged)
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    batch = shoot_many(S, p[None], q[None], opts, weights)
    lam0 = batch.lam0[0]
    if not batch.converged[0] or np.all(p == q):
        return lam0, float(batch.lengths[0]), bool(batch.converged[0])

    frame = S.frame

    def residual(lam):
        return _endpoint_residual(frame, p, lam, q, opts.steps)

    sol = root(residual, lam0, method="hybr")
    if sol.success and np.linalg.norm(residual(sol.x)) <= np.linalg.norm(residual(lam0)):
        lam0 = sol.x
    length = float(np.sqrt(2.0 * hamiltonian(frame, p, lam0)))
    return lam0, length, True


def sample_geodesics(S, P, Lam, times: Sequence[float], steps: int) -> np.ndarray:
    """
    Positions of unit-time normal geodesics at the given times.

    Returns:
        (len(times), B, n) array, linearly interpolated between RK4 nodes
    """
    xs, _, _ = flow_hamiltonian(S.frame, np.atleast_2d(P), np.atleast_2d(Lam), 1.0, steps, record=True)
    grid = np.linspace(0.0, 1.0, steps + 1)
    out = []
    for t in times:
        k = min(int(np.searchsorted(grid, t, side="right")) - 1, steps - 1)
        frac = (t - grid[k]) * steps
        out.append((1.0 - frac) * xs[k] + frac * xs[k + 1])
    return np.stack(out)
