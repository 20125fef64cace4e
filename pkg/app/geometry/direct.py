"""
Direct optimal control for Carnot-Caratheodory distances.

Energy int |u|^2 over piecewise-constant controls on [0, 1] with N segments
is minimized in three stages:

    1. multi-start direct collocation (implicit-midpoint defects penalized
       with an increasing weight schedule), L-BFGS-B with analytic gradients
    2. single-shooting polish of the winner: RK4 with a few substeps per
       segment, adjoint gradient, final penalty weights
    3. Gauss-Newton endpoint correction at certificate resolution, using
       forward sensitivities of the RK4 map
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize

from app.algebra.compiled import CompiledFrame
from app.config.settings import DistanceOptions, ShootingOptions
from app.geometry.integrate import flow_hamiltonian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CandidateResult:
    energy: float
    defect: float
    controls: np.ndarray
    nodes: np.ndarray
    label: str


# ============================================================================
# Stage 1: collocation
# ============================================================================

class CollocationProblem:
    """
    Nodes X_0..X_N (X_0 = p, X_N = q fixed) and controls U_0..U_{N-1}.

    Objective  h sum |U_k|^2 + w sum |D_k|^2  with the midpoint defect
    D_k = X_{k+1} - X_k - h F((X_k + X_{k+1}) / 2) U_k and h = 1 / N.
    """

    def __init__(self, frame: CompiledFrame, p, q, segments: int):
        self.frame = frame
        self.p = np.asarray(p, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.N = segments
        self.n = frame.n
        self.m = frame.m
        self.h = 1.0 / segments
        self.weight = 1.0

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        k = (self.N - 1) * self.n
        X = np.vstack([self.p, z[:k].reshape(self.N - 1, self.n), self.q])
        U = z[k:].reshape(self.N, self.m)
        return X, U

    @staticmethod
    def pack(X: np.ndarray, U: np.ndarray) -> np.ndarray:
        return np.concatenate([X[1:-1].ravel(), U.ravel()])

    def defects(self, X, U) -> np.ndarray:
        F = self.frame.values(0.5 * (X[1:] + X[:-1]))
        return X[1:] - X[:-1] - self.h * np.einsum("kjm,km->kj", F, U)

    def __call__(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        X, U = self.split(z)
        h, w = self.h, self.weight
        M = 0.5 * (X[1:] + X[:-1])
        F = self.frame.values(M)
        J = self.frame.jacobians(M)
        D = X[1:] - X[:-1] - h * np.einsum("kjm,km->kj", F, U)

        value = h * float(np.sum(U * U)) + w * float(np.sum(D * D))

        gU = 2.0 * h * U - 2.0 * w * h * np.einsum("kjm,kj->km", F, D)
        JuD = np.einsum("kjlm,km,kj->kl", J, U, D)
        gX = np.zeros_like(X)
        gX[1:] += 2.0 * w * (D - 0.5 * h * JuD)
        gX[:-1] += 2.0 * w * (-D - 0.5 * h * JuD)
        return value, self.pack(gX, gU)

    def controls_for_nodes(self, X: np.ndarray) -> np.ndarray:
        """Least-norm controls reproducing the node increments at midpoints."""
        F = self.frame.values(0.5 * (X[1:] + X[:-1]))
        V = (X[1:] - X[:-1]) / self.h
        return np.einsum("kmj,kj->km", np.linalg.pinv(F), V)


def _line_nodes(p, q, N) -> np.ndarray:
    s = np.linspace(0.0, 1.0, N + 1)[:, None]
    return p + s * (q - p)


def collocation_starts(
    problem: CollocationProblem, restarts: int, perturbation: float, rng: np.random.Generator
) -> List[Tuple[str, np.ndarray, np.ndarray]]:
    """Straight line plus `restarts` randomly bowed node paths."""
    N, n = problem.N, problem.n
    base = _line_nodes(problem.p, problem.q, N)
    bump = np.sin(np.pi * np.linspace(0.0, 1.0, N + 1))[:, None]
    amplitude = perturbation * (np.linalg.norm(problem.q - problem.p) + 0.1)
    starts = [("line", base, problem.controls_for_nodes(base))]
    for r in range(restarts):
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        X = base + amplitude * rng.uniform(0.3, 1.0) * bump * direction
        X = X + 0.05 * amplitude * bump * rng.normal(size=(N + 1, n))
        X[0], X[-1] = problem.p, problem.q
        starts.append((f"random{r}", X, problem.controls_for_nodes(X)))
    return starts


def shooting_start(S, p, q, segments: int, opts: ShootingOptions):
    """Nodes and midpoint controls of a shot normal geodesic, if one converges."""
    from app.geometry.shooting import shoot

    lam0, _, ok = shoot(S, p, q, opts)
    if not ok:
        return None
    sub = 8
    xs, _, hs = flow_hamiltonian(S.frame, np.asarray(p, float), lam0, 1.0, segments * sub, record=True)
    nodes = xs[::sub].copy()
    nodes[-1] = q
    return ("shooting", nodes, hs[sub // 2::sub][:segments])


def run_collocation(problem: CollocationProblem, X, U, opts: DistanceOptions, label: str) -> CandidateResult:
    z = problem.pack(X, U)
    for w in opts.penalties:
        problem.weight = w
        res = minimize(problem, z, jac=True, method="L-BFGS-B", options={"maxiter": opts.maxiter})
        z = res.x
        logger.debug("Start %s, penalty %.0e: objective %.6g (%s)", label, w, res.fun, res.message)
    X, U = problem.split(z)
    D = problem.defects(X, U)
    energy = problem.h * float(np.sum(U * U))
    return CandidateResult(energy, float(np.max(np.abs(D))), U, X, label)


# ============================================================================
# Stage 2: single shooting with adjoint gradient
# ============================================================================

class ShootingPolish:
    """
    Objective  (1/N) sum |U_k|^2 + w |x_N(U) - q|^2  with x_N from RK4.
    """

    def __init__(self, frame: CompiledFrame, p, q, segments: int, substeps: int):
        self.frame = frame
        self.p = np.asarray(p, dtype=float)
        self.q = np.asarray(q, dtype=float)
        self.N = segments
        self.s = substeps
        self.h = 1.0 / (segments * substeps)
        self.weight = 1.0

    def _forward(self, U: np.ndarray):
        frame, h = self.frame, self.h
        x = self.p.copy()
        stages = np.empty((self.N * self.s, 4, frame.n))
        step = 0
        for k in range(self.N):
            u = U[k]
            for _ in range(self.s):
                k1 = frame.apply(x, u)
                x2 = x + 0.5 * h * k1
                k2 = frame.apply(x2, u)
                x3 = x + 0.5 * h * k2
                k3 = frame.apply(x3, u)
                x4 = x + h * k3
                k4 = frame.apply(x4, u)
                stages[step] = (x, x2, x3, x4)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                step += 1
        return x, stages

    def endpoint(self, U: np.ndarray) -> np.ndarray:
        return self._forward(U)[0]

    def __call__(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        frame, h, w = self.frame, self.h, self.weight
        U = z.reshape(self.N, frame.m)
        xN, stages = self._forward(U)
        r = xN - self.q
        value = float(np.sum(U * U)) / self.N + w * float(r @ r)

        F = frame.values(stages)                  # (steps, 4, n, m)
        J = frame.jacobians(stages)               # (steps, 4, n, n, m)
        u_steps = np.repeat(U, self.s, axis=0)    # (steps, m)
        A = np.einsum("sijlm,sm->sijl", J, u_steps)

        gU = 2.0 * U / self.N
        a = 2.0 * w * r
        for step in range(self.N * self.s - 1, -1, -1):
            c = a * (h / 6.0)
            A1, A2, A3, A4 = A[step]
            F1, F2, F3, F4 = F[step]
            kb4 = c
            xb4 = A4.T @ kb4
            kb3 = 2.0 * c + h * xb4
            xb3 = A3.T @ kb3
            kb2 = 2.0 * c + 0.5 * h * xb3
            xb2 = A2.T @ kb2
            kb1 = c + 0.5 * h * xb2
            xb1 = A1.T @ kb1
            gU[step // self.s] += F1.T @ kb1 + F2.T @ kb2 + F3.T @ kb3 + F4.T @ kb4
            a = a + xb1 + xb2 + xb3 + xb4
        return value, gU.ravel()


def polish(problem: ShootingPolish, U: np.ndarray, opts: DistanceOptions) -> np.ndarray:
    z = U.ravel().copy()
    for w in opts.polish_penalties:
        problem.weight = w
        res = minimize(problem, z, jac=True, method="L-BFGS-B", options={"maxiter": opts.polish_maxiter})
        z = res.x
        logger.debug("Polish penalty %.0e: objective %.8g (%s)", w, res.fun, res.message)
    return z.reshape(U.shape)


# ============================================================================
# Stage 3: endpoint correction
# ============================================================================

def endpoint_sensitivity(frame: CompiledFrame, p, U: np.ndarray, substeps: int):
    """
    Endpoint of the RK4 map and its Jacobian with respect to all controls.

    Returns:
        (x_N, Z) with Z of shape (n, N * m)
    """
    N, m = U.shape
    n = frame.n
    h = 1.0 / (N * substeps)
    x = np.asarray(p, dtype=float).copy()
    Z = np.zeros((n, N * m))

    def parts(y, u):
        return frame.apply(y, u), frame.values(y), np.einsum("jlm,m->jl", frame.jacobians(y), u)

    for k in range(N):
        u = U[k]
        cols = slice(k * m, (k + 1) * m)
        for _ in range(substeps):
            k1, F1, A1 = parts(x, u)
            dk1 = A1 @ Z
            dk1[:, cols] += F1
            x2 = x + 0.5 * h * k1
            k2, F2, A2 = parts(x2, u)
            dk2 = A2 @ (Z + 0.5 * h * dk1)
            dk2[:, cols] += F2
            x3 = x + 0.5 * h * k2
            k3, F3, A3 = parts(x3, u)
            dk3 = A3 @ (Z + 0.5 * h * dk2)
            dk3[:, cols] += F3
            x4 = x + h * k3
            k4, F4, A4 = parts(x4, u)
            dk4 = A4 @ (Z + h * dk3)
            dk4[:, cols] += F4
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            Z = Z + (h / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4)
    return x, Z


def close_endpoint(frame: CompiledFrame, p, q, U: np.ndarray, substeps: int, iterations: int, tol: float):
    """Least-norm Gauss-Newton corrections of the controls until x_N = q."""
    q = np.asarray(q, dtype=float)
    U = U.copy()
    for it in range(iterations):
        xN, Z = endpoint_sensitivity(frame, p, U, substeps)
        r = xN - q
        if np.linalg.norm(r) <= tol:
            break
        delta, *_ = np.linalg.lstsq(Z, -r, rcond=None)
        U = U + delta.reshape(U.shape)
        logger.debug("Endpoint correction %d: residual %.3e", it, np.linalg.norm(r))
    return U


# ============================================================================
# Driver
# ============================================================================

def _pick_best(candidates: List[CandidateResult], scale: float) -> CandidateResult:
    feasible = [c for c in candidates if c.defect <= 1e-3 * max(scale, 1e-3)]
    pool = feasible or candidates
    return min(pool, key=lambda c: (c.energy if feasible else c.energy + 1e6 * c.defect))


def minimize_energy(S, p, q, opts: DistanceOptions = DistanceOptions(),
                    shooting_opts: Optional[ShootingOptions] = None) -> Tuple[np.ndarray, CandidateResult]:
    """
    Piecewise-constant controls (N, m) of least energy from p to q.

    Returns:
        (controls, winning stage-1 candidate)
    """
    frame = S.frame
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    problem = CollocationProblem(frame, p, q, opts.segments)
    rng = np.random.default_rng(opts.seed)
    starts = collocation_starts(problem, opts.restarts, opts.perturbation, rng)
    if opts.shooting_start:
        seeded = shooting_start(S, p, q, opts.segments, shooting_opts or ShootingOptions(seed=opts.seed))
        if seeded is not None:
            starts.append(seeded)

    def run(label, X, U):
        return run_collocation(CollocationProblem(frame, p, q, opts.segments), X, U, opts, label)

    candidates = Parallel(n_jobs=opts.threads, prefer="threads")(
        delayed(run)(label, X, U) for label, X, U in starts
    )
    best = _pick_best(candidates, float(np.linalg.norm(q - p)))
    logger.info(
        "Collocation winner %s of %d starts: energy %.8g, max defect %.2e",
        best.label, len(candidates), best.energy, best.defect,
    )

    polisher = ShootingPolish(frame, p, q, opts.segments, opts.substeps)
    U = polish(polisher, best.controls, opts)
    return U, best
