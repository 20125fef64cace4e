"""
Distortion coefficients sigma_{K,N}^{(t)} and tau_{K,N}^{(t)}.

Both accept scalar or array theta and return the same shape; +inf is the
sentinel for K theta^2 >= N pi^2.
"""

from typing import Union

import numpy as np

from app.errors import ArgumentError

ArrayLike = Union[float, np.ndarray]


def s_kappa(kappa: float, theta: ArrayLike) -> ArrayLike:
    """sin(sqrt(k) th)/sqrt(k), th, or sinh(sqrt(-k) th)/sqrt(-k) by the sign of kappa."""
    theta = np.asarray(theta, dtype=float)
    if kappa > 0:
        out = np.sin(np.sqrt(kappa) * theta) / np.sqrt(kappa)
    elif kappa < 0:
        out = np.sinh(np.sqrt(-kappa) * theta) / np.sqrt(-kappa)
    else:
        out = theta.copy()
    return out if out.ndim else float(out)


def _sinh_ratio(a: np.ndarray, t: float) -> np.ndarray:
    """sinh(a t) / sinh(a) for a > 0 without overflow."""
    return np.exp(a * (t - 1.0)) * -np.expm1(-2.0 * a * t) / -np.expm1(-2.0 * a)


def _check(N: float, t: float, theta: np.ndarray) -> None:
    if not N > 0:
        raise ArgumentError(f"N must be positive, got {N}")
    if not 0.0 <= t <= 1.0:
        raise ArgumentError(f"t must lie in [0, 1], got {t}")
    if np.any(theta < 0):
        raise ArgumentError("theta must be nonnegative")


def distortion_sigma(K: float, N: float, t: float, theta: ArrayLike) -> ArrayLike:
    theta = np.asarray(theta, dtype=float)
    _check(N, t, theta)
    kt2 = K * theta**2
    out = np.full(theta.shape, float(t))
    if K != 0:
        kappa = K / N
        active = (kt2 != 0.0) & (kt2 < N * np.pi**2)
        th = theta[active]
        if kappa > 0:
            out[active] = np.sin(np.sqrt(kappa) * t * th) / np.sin(np.sqrt(kappa) * th)
        else:
            out[active] = _sinh_ratio(np.sqrt(-kappa) * th, t)
        out[kt2 >= N * np.pi**2] = np.inf
    return out if out.ndim else float(out)


def distortion_tau(K: float, N: float, t: float, theta: ArrayLike) -> ArrayLike:
    """t^(1/N) sigma_{K,N-1}^{(t)}(theta)^(1 - 1/N)."""
    if not N > 1:
        raise ArgumentError(f"tau needs N > 1, got {N}")
    theta = np.asarray(theta, dtype=float)
    _check(N, t, theta)
    if t == 0.0:
        out = np.zeros(theta.shape)
    else:
        sigma = np.asarray(distortion_sigma(K, N - 1.0, t, theta))
        with np.errstate(over="ignore"):
            out = t ** (1.0 / N) * sigma ** (1.0 - 1.0 / N)
    return out if out.ndim else float(out)
