"""Piecewise-constant control paths h on uniform time grids.

A control is one lattice state per interval of a uniform grid on [0, T],
held constant across each interval (left endpoint convention).  Its squared
L^2(0,T; ell^2) norm is ``sum_k dt ||h_k||^2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeShape, StateVector

__all__ = ["ControlPath"]


@dataclass
class ControlPath:
    shape: LatticeShape
    t_end: float
    values: np.ndarray  # (n_steps, site_count), one row per interval

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.t_end <= 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.values.ndim != 2 or self.values.shape[1] != self.shape.site_count:
            raise ValueError(
                f"values shape {self.values.shape} does not match "
                f"(n_steps, {self.shape.site_count})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("control values must all be finite")

    @classmethod
    def zeros(cls, shape: LatticeShape, t_end: float, n_steps: int) -> "ControlPath":
        return cls(shape, t_end, np.zeros((n_steps, shape.site_count)))

    @classmethod
    def constant(cls, shape: LatticeShape, t_end: float, n_steps: int,
                 value: StateVector) -> "ControlPath":
        return cls(shape, t_end, np.tile(value.values, (n_steps, 1)))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def index_at(self, t: float) -> int:
        """Interval containing time t (left-closed), clipped to the grid."""
        return min(int(t / self.dt + 1e-12), self.n_steps - 1)

    def value_at(self, t: float) -> np.ndarray:
        return self.values[self.index_at(t)]

    def l2_norm_sq(self) -> float:
        """Squared L^2(0,T; ell^2) norm: sum_k dt ||h_k||^2."""
        return float(self.dt * np.sum(self.values**2))

    def restricted(self, t_end: float) -> "ControlPath":
        """The control viewed on a shorter horizon [0, t_end]."""
        if t_end > self.t_end + 1e-12:
            raise ValueError("cannot extend a control path")
        n = int(round(t_end / self.dt))
        if abs(n * self.dt - t_end) > 1e-9 * max(1.0, t_end):
            raise ValueError("t_end is not a multiple of the control grid spacing")
        return ControlPath(self.shape, t_end, self.values[:n].copy())

    def to_csv(self, path) -> None:
        labels = ["site_" + "_".join(map(str, map(int, s))) for s in self.shape.sites()]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_left"] + labels)
            for k in range(self.n_steps):
                w.writerow([repr(k * self.dt)] + [repr(float(v)) for v in self.values[k]])
