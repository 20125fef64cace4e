"""
Discrete measures with densities against a reference measure m.

m is given by a density against coordinate Lebesgue measure. A measure
mu = rho m is stored as support points, weights and the values of rho at
the support.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.neighbors import KernelDensity

from app.config.settings import CDOptions
from app.errors import ArgumentError, DensityError, DimensionError

logger = logging.getLogger(__name__)

ReferenceDensity = Callable[[np.ndarray], np.ndarray]

_WEIGHT_TOL = 1e-12


def lebesgue_density(x: np.ndarray) -> np.ndarray:
    return np.ones(len(np.atleast_2d(x)))


def halfplane_density(p: float) -> ReferenceDensity:
    """x_1^p on {x_1 > 0}, zero elsewhere."""

    def density(x: np.ndarray) -> np.ndarray:
        x1 = np.atleast_2d(x)[:, 0]
        return np.where(x1 > 0, np.abs(x1) ** p, 0.0)

    return density


@dataclass(frozen=True)
class DiscreteMeasure:
    """
    Weighted support points. rho may be omitted (stored as NaN), in which
    case consumers estimate it.
    """

    points: np.ndarray
    weights: np.ndarray
    rho: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        rho = np.full(len(points), np.nan) if self.rho is None else np.asarray(self.rho, dtype=float)
        if weights.shape != (len(points),) or rho.shape != (len(points),):
            raise DimensionError(
                f"{len(points)} support points with {weights.shape} weights and {rho.shape} densities"
            )
        if np.any(weights < 0):
            raise ArgumentError("Weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ArgumentError(f"Weights sum to {weights.sum():.15g}, not 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def has_density(self) -> bool:
        return not np.any(np.isnan(self.rho))

    def with_rho(self, rho) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, self.weights, rho)

    def without_rho(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, self.weights)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.points, columns=[f"x{i + 1}" for i in range(self.dim)])
        df["weight"] = self.weights
        if self.has_density:
            df["rho"] = self.rho
        return df


def grid_block(
    center: Sequence[float],
    half_widths: Union[float, Sequence[float]],
    per_axis: int = 7,
    reference: ReferenceDensity = lebesgue_density,
) -> DiscreteMeasure:
    """
    Uniform probability on a coordinate box, discretized at cell centers.

    rho is exact: the Lebesgue density 1/volume divided by the reference.
    """
    center = np.asarray(center, dtype=float)
    half = np.broadcast_to(np.asarray(half_widths, dtype=float), center.shape)
    if np.any(half <= 0):
        raise ArgumentError("Box half widths must be positive")
    offsets = (2.0 * np.arange(per_axis) + 1.0) / per_axis - 1.0
    axes = [c + h * offsets for c, h in zip(center, half)]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(center))
    volume = float(np.prod(2.0 * half))
    ref = reference(points)
    with np.errstate(divide="ignore"):
        rho = np.where(ref > 0, 1.0 / (volume * ref), np.inf)
    weights = np.full(len(points), 1.0 / len(points))
    return DiscreteMeasure(points, weights, rho)


def bandwidths(points: np.ndarray, weights: np.ndarray, opts: CDOptions = CDOptions()) -> np.ndarray:
    """Per-coordinate bandwidth factor * weighted std * n^(-1/5), floored."""
    mean = weights @ points
    std = np.sqrt(weights @ (points - mean) ** 2)
    h = opts.bandwidth_factor * std * len(points) ** (-0.2)
    floored = h < opts.bandwidth_floor
    if np.any(floored):
        logger.warning("KDE bandwidth floored on coordinates %s", np.flatnonzero(floored).tolist())
        h = np.maximum(h, opts.bandwidth_floor)
    return h


def kde_density(
    points: np.ndarray,
    weights: np.ndarray,
    at: np.ndarray,
    reference: ReferenceDensity = lebesgue_density,
    opts: CDOptions = CDOptions(),
) -> np.ndarray:
    """
    Density against the reference m, estimated with a Gaussian KDE.

    Coordinates are scaled by their bandwidths so that sklearn's isotropic
    kernel becomes the product kernel; the Jacobian is divided back out.
    """
    points = np.atleast_2d(points)
    at = np.atleast_2d(at)
    h = bandwidths(points, weights, opts)
    kde = KernelDensity(kernel="gaussian", bandwidth=1.0).fit(points / h, sample_weight=weights)
    lebesgue = np.exp(kde.score_samples(at / h)) / float(np.prod(h))
    ref = reference(at)
    if np.any(ref <= 0):
        raise DensityError("Reference density vanishes at an evaluation point")
    return lebesgue / ref


def estimate_measure(
    points: np.ndarray,
    weights: np.ndarray,
    reference: ReferenceDensity = lebesgue_density,
    opts: CDOptions = CDOptions(),
) -> DiscreteMeasure:
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    return DiscreteMeasure(points, weights, kde_density(points, weights, points, reference, opts))


def renyi_entropy(mu: DiscreteMeasure, N: float) -> float:
    """S_N(mu | m) = -sum w_i rho_i^(-1/N)."""
    if not N > 1:
        raise ArgumentError(f"Renyi entropy needs N > 1, got {N}")
    support = mu.weights > 0
    rho = mu.rho[support]
    if np.any(~np.isfinite(rho)) or np.any(rho <= 0):
        raise DensityError("Density must be finite and positive on the support")
    return -float(mu.weights[support] @ rho ** (-1.0 / N))


def write_measure(mu: DiscreteMeasure, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mu.to_frame().to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def read_measure(path: Union[str, Path]) -> DiscreteMeasure:
    df = pd.read_csv(path)
    coords = sorted((c for c in df.columns if c.startswith("x")), key=lambda c: int(c[1:]))
    if not coords or "weight" not in df:
        raise ArgumentError(f"{path}: expected columns x1..xn, weight and optionally rho")
    weights = df["weight"].to_numpy(float)
    rho = df["rho"].to_numpy(float) if "rho" in df else None
    return DiscreteMeasure(df[coords].to_numpy(float), weights / weights.sum(), rho)
