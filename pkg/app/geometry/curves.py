"""
Sampled admissible curves with their controls.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from app.errors import ArgumentError


@dataclass(frozen=True)
class ControlCurve:
    """
    A trajectory together with the control that drives it.

    Row k of `controls` is the control on [t_k, t_{k+1}); the last row
    repeats the previous one so all arrays share the time grid.

    Attributes:
        times: (K+1,) strictly increasing
        states: (K+1, n)
        controls: (K+1, m)
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.states) or len(self.times) != len(self.controls):
            raise ArgumentError("times, states and controls must share their first axis")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ArgumentError("Curve times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.states[0]

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.controls, axis=1)

    @property
    def length(self) -> float:
        """Control-norm length sum_k |u_k| (t_{k+1} - t_k)."""
        if len(self.times) < 2:
            return 0.0
        return float(np.sum(self.speeds[:-1] * np.diff(self.times)))

    def state_at(self, t) -> np.ndarray:
        """Linear interpolation of the state at time(s) t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        cols = [np.interp(t, self.times, self.states[:, j]) for j in range(self.dim)]
        out = np.stack(cols, axis=-1)
        return out[0] if out.shape[0] == 1 else out

    def shifted(self, offset: float) -> "ControlCurve":
        return ControlCurve(self.times + offset, self.states, self.controls)

    def to_frame(self, state_names: Optional[List[str]] = None) -> pd.DataFrame:
        """Geodesic dump layout: t, x1..xn, u1..um."""
        names = state_names or [f"x{j + 1}" for j in range(self.dim)]
        data = {"t": self.times}
        for j, name in enumerate(names):
            data[name] = self.states[:, j]
        for i in range(self.controls.shape[1]):
            data[f"u{i + 1}"] = self.controls[:, i]
        return pd.DataFrame(data)


def constant_curve(point, m: int, duration: float = 1.0) -> ControlCurve:
    p = np.asarray(point, dtype=float)
    return ControlCurve(
        np.array([0.0, duration]), np.stack([p, p]), np.zeros((2, m))
    )
