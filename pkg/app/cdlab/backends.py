"""
Distance providers for the transport machinery.

A backend returns distance matrices between two point sets and the
positions at given times along geodesics between paired points.
"""

import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist

from app.config.settings import ConeOptions, DistanceOptions, ShootingOptions
from app.geometry.geodesy import cc_distance, geodesic_between
from app.geometry.shooting import sample_geodesics, shoot_many
from app.geometry.structure import SubRiemannianStructure
from app.warped.cone_grushin import ConeGrushinSpace, cone_grushin_distance, reduce_pair

logger = logging.getLogger(__name__)


class DistanceBackend(ABC):
    name: str = "backend"

    @abstractmethod
    def distances(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """(len(X), len(Y)) distance matrix."""

    @abstractmethod
    def interpolate(self, X: np.ndarray, Y: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """(len(times), len(X)) positions along geodesics X[b] -> Y[b]."""


class EuclideanBackend(DistanceBackend):
    name = "euclidean"

    def distances(self, X, Y):
        return cdist(np.atleast_2d(X), np.atleast_2d(Y))

    def interpolate(self, X, Y, times):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        return np.stack([(1.0 - t) * X + t * Y for t in times])


class StructureBackend(DistanceBackend):
    """cc_distance and constant-speed certificates of a sub-Riemannian structure."""

    def __init__(self, S: SubRiemannianStructure, opts: DistanceOptions = DistanceOptions()):
        self.S = S
        self.opts = opts
        self.name = f"structure:{S.label}"

    def _pairs(self, X, Y):
        single = self.opts.model_copy(update={"threads": 1})
        return Parallel(n_jobs=self.opts.threads, prefer="threads")(
            delayed(cc_distance)(self.S, x, y, single) for x, y in zip(X, Y)
        )

    def distances(self, X, Y):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        ii, jj = np.meshgrid(np.arange(len(X)), np.arange(len(Y)), indexing="ij")
        estimates = self._pairs(X[ii.ravel()], Y[jj.ravel()])
        return np.array([e.upper for e in estimates]).reshape(len(X), len(Y))

    def interpolate(self, X, Y, times):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        out = np.empty((len(times), len(X), X.shape[1]))
        for b, estimate in enumerate(self._pairs(X, Y)):
            curve = geodesic_between(self.S, X[b], Y[b], self.opts, estimate)
            for k, t in enumerate(times):
                out[k, b] = curve.state_at(t * curve.duration)
        return out


class ShootingBackend(DistanceBackend):
    """
    Batched normal-geodesic shooting. Pairs the shooting does not close fall
    back to the direct method with a warning.
    """

    def __init__(
        self,
        S: SubRiemannianStructure,
        opts: ShootingOptions = ShootingOptions(),
        fallback: Optional[DistanceOptions] = DistanceOptions(),
    ):
        self.S = S
        self.opts = opts
        self.fallback = StructureBackend(S, fallback) if fallback is not None else None
        self.name = f"shooting:{S.label}"

    def _failed(self, converged: np.ndarray) -> np.ndarray:
        failed = np.flatnonzero(~converged)
        if failed.size == 0:
            return failed
        if self.fallback is None:
            logger.warning("Shooting failed on %d pairs; keeping the best residual", failed.size)
            return failed[:0]
        logger.warning("Shooting failed on %d pairs; using the direct method", failed.size)
        return failed

    def distances(self, X, Y):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        ii, jj = np.meshgrid(np.arange(len(X)), np.arange(len(Y)), indexing="ij")
        P, Q = X[ii.ravel()], Y[jj.ravel()]
        batch = shoot_many(self.S, P, Q, self.opts)
        D = batch.lengths.copy()
        failed = self._failed(batch.converged)
        if len(failed):
            D[failed] = [e.upper for e in self.fallback._pairs(P[failed], Q[failed])]
        return D.reshape(len(X), len(Y))

    def interpolate(self, X, Y, times):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        batch = shoot_many(self.S, X, Y, self.opts)
        out = sample_geodesics(self.S, X, batch.lam0, times, self.opts.steps)
        failed = self._failed(batch.converged)
        if len(failed):
            out[:, failed] = self.fallback.interpolate(X[failed], Y[failed], times)
        return out


class ConeGrushinBackend(DistanceBackend):
    """Reduced-model barrier distances; interpolation at constant speed along the certificate path."""

    def __init__(self, space: ConeGrushinSpace, opts: ConeOptions = ConeOptions()):
        self.space = space
        self.opts = opts
        self.name = f"cone_grushin(k={space.k}, alpha={space.alpha:g})"

    def _pairs(self, X, Y):
        single = self.opts.model_copy(update={"threads": 1})
        return Parallel(n_jobs=self.opts.threads, prefer="threads")(
            delayed(cone_grushin_distance)(self.space, x, y, single) for x, y in zip(X, Y)
        )

    def distances(self, X, Y):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        ii, jj = np.meshgrid(np.arange(len(X)), np.arange(len(Y)), indexing="ij")
        estimates = self._pairs(X[ii.ravel()], Y[jj.ravel()])
        return np.array([e.value for e in estimates]).reshape(len(X), len(Y))

    def interpolate(self, X, Y, times):
        X, Y = np.atleast_2d(X), np.atleast_2d(Y)
        out = np.empty((len(times), len(X), X.shape[1]))
        for b, estimate in enumerate(self._pairs(X, Y)):
            path = estimate.path
            points = path.to_points(self.space, reduce_pair(self.space, X[b], Y[b]))
            arc = np.concatenate([[0.0], np.cumsum(path.segment_lengths())])
            total = arc[-1] if arc[-1] > 0 else 1.0
            for k, t in enumerate(times):
                out[k, b] = [np.interp(t * total, arc, points[:, c]) for c in range(points.shape[1])]
        return out
