"""Saved time grids of lattice states, with CSV streaming."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeShape, StateVector, tail_mass_array

__all__ = ["Trajectory"]


@dataclass
class Trajectory:
    """States saved along one solution path.

    ``states[k]`` is the state at ``times[k]``; ``states[0]`` is the initial
    condition exactly.  ``seed``/``path_index`` identify the noise stream
    that produced a stochastic path (both 0 for deterministic solves).
    """

    shape: LatticeShape
    times: np.ndarray
    states: np.ndarray
    seed: int = 0
    path_index: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (self.times.size, self.shape.site_count):
            raise ValueError(
                f"states shape {self.states.shape} does not match "
                f"{self.times.size} times x {self.shape.site_count} sites"
            )
        if self.times.size and self.times[0] != 0.0:
            raise ValueError("trajectories start at time 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def state(self, k: int) -> StateVector:
        return StateVector(self.shape, self.states[k])

    @property
    def final(self) -> StateVector:
        return StateVector(self.shape, self.states[-1])

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=-1)

    def to_csv(self, path, summary_only: bool = False, tail_k: tuple = ()) -> None:
        """Full mode: time plus one column per site.  Summary mode: time,
        squared norm, and the tail mass for each radius in ``tail_k``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if summary_only:
                w.writerow(["time", "norm_sq"] + [f"tail_mass_k{k}" for k in tail_k])
                norms_sq = np.sum(self.states**2, axis=-1)
                tails = [tail_mass_array(self.shape, self.states, k) for k in tail_k]
                for i, t in enumerate(self.times):
                    w.writerow([repr(float(t)), repr(float(norms_sq[i]))]
                               + [repr(float(col[i])) for col in tails])
            else:
                labels = ["site_" + "_".join(map(str, map(int, s))) for s in self.shape.sites()]
                w.writerow(["time"] + labels)
                for i, t in enumerate(self.times):
                    w.writerow([repr(float(t))] + [repr(float(v)) for v in self.states[i]])
