"""
Vectorized float evaluation of a frame of polynomial vector fields.

Each frame is compiled once into exponent/coefficient arrays and a scatter
matrix, so values and Jacobians at a batch of points cost a couple of numpy
calls.
"""

from typing import List, Sequence, Tuple

import numpy as np

from app.algebra.symfield import PolyVectorField
from app.errors import DimensionError


def _compile_terms(entries: List[Tuple[int, Tuple[int, ...], float]], n: int, size: int):
    if not entries:
        return np.zeros((1, n), dtype=float), np.zeros((1, size))
    exps = np.array([e[1] for e in entries], dtype=float)
    scatter = np.zeros((len(entries), size))
    for row, (target, _, coeff) in enumerate(entries):
        scatter[row, target] = coeff
    return exps, scatter


class CompiledFrame:
    """
    Float evaluator for generators X_1..X_m on R^n.

    Usage:
        frame = CompiledFrame(structure.generators)
        F = frame.values(points)        # (..., n, m), column i is X_i
        J = frame.jacobians(points)     # (..., n, n, m), J[j, k, i] = d_k X_i^j
        v = frame.apply(points, u)      # (..., n) = F @ u
    """

    def __init__(self, fields: Sequence[PolyVectorField]):
        if not fields:
            raise DimensionError("A frame needs at least one field")
        self.n = fields[0].dim
        self.m = len(fields)
        if any(X.dim != self.n for X in fields):
            raise DimensionError("All frame fields must share a dimension")

        value_terms = []
        jac_terms = []
        for i, X in enumerate(fields):
            for j, mono, coeff in X.terms():
                value_terms.append((j * self.m + i, mono, float(coeff)))
                for k, power in enumerate(mono):
                    if power == 0:
                        continue
                    lowered = list(mono)
                    lowered[k] -= 1
                    target = (j * self.n + k) * self.m + i
                    jac_terms.append((target, tuple(lowered), float(coeff) * power))

        self._val_exps, self._val_scatter = _compile_terms(value_terms, self.n, self.n * self.m)
        self._jac_exps, self._jac_scatter = _compile_terms(
            jac_terms, self.n, self.n * self.n * self.m
        )

    @staticmethod
    def _monomials(x: np.ndarray, exps: np.ndarray) -> np.ndarray:
        return np.prod(x[..., None, :] ** exps, axis=-1)

    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f"Points of dim {x.shape[-1]} for a frame on R^{self.n}")
        return x

    def values(self, x) -> np.ndarray:
        x = self._points(x)
        flat = self._monomials(x, self._val_exps) @ self._val_scatter
        return flat.reshape(x.shape[:-1] + (self.n, self.m))

    def jacobians(self, x) -> np.ndarray:
        x = self._points(x)
        flat = self._monomials(x, self._jac_exps) @ self._jac_scatter
        return flat.reshape(x.shape[:-1] + (self.n, self.n, self.m))

    def apply(self, x, u) -> np.ndarray:
        return np.einsum("...jm,...m->...j", self.values(x), np.asarray(u, dtype=float))
