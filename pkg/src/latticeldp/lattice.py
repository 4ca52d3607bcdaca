"""Truncated integer-lattice index sets and discrete difference operators.

States live on the box ``max_j |i_j| <= M`` inside the N-dimensional integer
lattice, enumerated lexicographically on ``(i_1, ..., i_N)``.  Everything
outside the box is treated as identically zero (Dirichlet padding), so the
forward/backward difference operators of a box-supported state carry one
extra shell of entries: ``diff`` therefore returns a state of radius ``M+1``.
Keeping that shell is what makes the adjoint identity
``(B_j u, v) = (u, B_j* v)`` and the energy identity
``(A u, u) = sum_j ||B_j u||^2`` exact rather than approximate at the
truncation boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "LatticeShape",
    "StateVector",
    "apply_laplacian",
    "apply_diff",
    "weighted_norm",
    "tail_mass",
    "inner",
    "laplacian_array",
    "diff_array",
]


class ShapeMismatchError(ValueError):
    """Two states (or a state and an operator) live on incompatible lattices."""


@dataclass(frozen=True)
class LatticeShape:
    """Box ``{i in Z^N : max_j |i_j| <= M}`` with lexicographic enumeration."""

    dim: int
    radius: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if self.radius < 0:
            raise ValueError(f"radius must be a nonnegative integer, got {self.radius}")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def site_count(self) -> int:
        return self.side**self.dim

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim

    def sites(self) -> np.ndarray:
        """All multi-indices, shape (site_count, dim), in enumeration order."""
        axes = [np.arange(-self.radius, self.radius + 1)] * self.dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def site_to_index(self, site) -> int:
        site = np.asarray(site, dtype=int)
        if site.shape != (self.dim,):
            raise ShapeMismatchError(f"site {site!r} is not a {self.dim}-dim multi-index")
        if np.any(np.abs(site) > self.radius):
            raise IndexError(f"site {tuple(site)} outside radius {self.radius}")
        idx = 0
        for c in site:
            idx = idx * self.side + (int(c) + self.radius)
        return idx

    def index_to_site(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.site_count:
            raise IndexError(f"index {index} out of range for {self.site_count} sites")
        coords = []
        for _ in range(self.dim):
            coords.append(index % self.side - self.radius)
            index //= self.side
        return tuple(reversed(coords))

    def site_radii(self) -> np.ndarray:
        """Euclidean norm |i| of every multi-index, shape (site_count,)."""
        s = self.sites()
        return np.sqrt(np.sum(s.astype(float) ** 2, axis=-1))

    def enlarged(self, by: int = 1) -> "LatticeShape":
        return LatticeShape(self.dim, self.radius + by)


@dataclass
class StateVector:
    """One real value per site of a truncated lattice (a point of ell^2)."""

    shape: LatticeShape
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.shape.site_count,):
            raise ShapeMismatchError(
                f"values shape {self.values.shape} does not match "
                f"site_count {self.shape.site_count}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("StateVector entries must all be finite")

    @classmethod
    def zeros(cls, shape: LatticeShape) -> "StateVector":
        return cls(shape, np.zeros(shape.site_count))

    @classmethod
    def basis(cls, shape: LatticeShape, site) -> "StateVector":
        """The unit sequence e_i."""
        v = np.zeros(shape.site_count)
        v[shape.site_to_index(site)] = 1.0
        return cls(shape, v)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def copy(self) -> "StateVector":
        return StateVector(self.shape, self.values.copy())

    def __getitem__(self, site) -> float:
        return float(self.values[self.shape.site_to_index(site)])

    def embed(self, shape: LatticeShape) -> "StateVector":
        """Zero-pad into a larger box of the same dimension."""
        if shape.dim != self.shape.dim:
            raise ShapeMismatchError("cannot embed across lattice dimensions")
        if shape.radius < self.shape.radius:
            raise ShapeMismatchError("target radius smaller than source")
        if shape.radius == self.shape.radius:
            return self.copy()
        pad = shape.radius - self.shape.radius
        grid = self.values.reshape(self.shape.grid_shape)
        grid = np.pad(grid, pad)
        return StateVector(shape, grid.ravel())

    def to_csv(self, path) -> None:
        """One row per site: the index tuple then the value."""
        sites = self.shape.sites()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"i{j + 1}" for j in range(self.shape.dim)] + ["value"])
            for s, v in zip(sites, self.values):
                w.writerow([*map(int, s), repr(float(v))])

    def to_binary(self, path) -> None:
        """Flat float64 in enumeration order."""
        self.values.astype("<f8").tofile(path)

    @classmethod
    def from_binary(cls, shape: LatticeShape, path) -> "StateVector":
        vals = np.fromfile(Path(path), dtype="<f8")
        return cls(shape, vals)


# ---------------------------------------------------------------------------
# Array-level operators.  All accept values of shape (..., site_count) and
# broadcast over the leading axes; batched time stepping relies on this.
# ---------------------------------------------------------------------------


def _as_grid(shape: LatticeShape, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != shape.site_count:
        raise ShapeMismatchError(
            f"last axis {values.shape[-1]} does not match site_count {shape.site_count}"
        )
    return values.reshape(values.shape[:-1] + shape.grid_shape)


def _shifted(grid: np.ndarray, axis: int, offset: int) -> np.ndarray:
    """grid sampled at i + offset*e_axis, zero outside the box."""
    out = np.zeros_like(grid)
    src = [slice(None)] * grid.ndim
    dst = [slice(None)] * grid.ndim
    if offset == 1:
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
    elif offset == -1:
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
    else:
        raise ValueError("offset must be +1 or -1")
    out[tuple(dst)] = grid[tuple(src)]
    return out


def laplacian_array(shape: LatticeShape, values: np.ndarray) -> np.ndarray:
    """(A u)_i = sum_j 2 u_i - u_{i+e_j} - u_{i-e_j}, truncated to the box."""
    grid = _as_grid(shape, values)
    lead = grid.ndim - shape.dim
    out = 2.0 * shape.dim * grid
    for j in range(shape.dim):
        axis = lead + j
        out -= _shifted(grid, axis, +1)
        out -= _shifted(grid, axis, -1)
    return out.reshape(values.shape)


def diff_array(shape: LatticeShape, values: np.ndarray, axis_j: int, forward: bool) -> np.ndarray:
    """Forward B_j or backward B_j* difference, returned on the radius M+1 box.

    (B_j u)_i = u_{i+e_j} - u_i and (B_j* u)_i = u_{i-e_j} - u_i, with u
    zero-padded; the result of either has support one shell wider than u.
    """
    if not 1 <= axis_j <= shape.dim:
        raise IndexError(f"axis {axis_j} out of range for dim {shape.dim}")
    values = np.asarray(values, dtype=float)
    grid = _as_grid(shape, values)
    lead = grid.ndim - shape.dim
    big = np.pad(grid, [(0, 0)] * lead + [(1, 1)] * shape.dim)
    axis = lead + (axis_j - 1)
    out = _shifted(big, axis, +1 if forward else -1) - big
    big_shape = shape.enlarged()
    return out.reshape(values.shape[:-1] + (big_shape.site_count,))


def kappa_sq(shape: LatticeShape) -> np.ndarray:
    """kappa^2(|i|) = 1 + |i|^2 per site, |i| the Euclidean multi-index norm."""
    r = shape.site_radii()
    return 1.0 + r * r


def kappa_delta_sq(shape: LatticeShape, delta: float) -> np.ndarray:
    """kappa_delta^2(|i|) = 1 + delta^2 |i|^2 per site."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    r = shape.site_radii()
    return 1.0 + (delta * r) ** 2


def weighted_norm_array(shape: LatticeShape, values: np.ndarray, weight: str = "standard",
                        delta: float | None = None) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != shape.site_count:
        raise ShapeMismatchError("values do not match lattice shape")
    if weight == "standard":
        w = None
    elif weight == "kappa":
        w = kappa_sq(shape)
    elif weight == "kappa_delta":
        if delta is None:
            raise ValueError("kappa_delta weight requires delta")
        w = kappa_delta_sq(shape, delta)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    sq = values * values if w is None else w * values * values
    return np.sqrt(np.sum(sq, axis=-1))


def tail_mass_array(shape: LatticeShape, values: np.ndarray, k: float) -> np.ndarray:
    """sum_{|i| >= k} |u_i|^2 over the trailing site axis."""
    if k < 0:
        raise ValueError("tail radius k must be nonnegative")
    mask = shape.site_radii() >= k
    values = np.asarray(values, dtype=float)
    return np.sum((values * values)[..., mask], axis=-1)


# ---------------------------------------------------------------------------
# StateVector-level operations (the public surface).
# ---------------------------------------------------------------------------


def apply_laplacian(u: StateVector) -> StateVector:
    """A u on the same box; symmetric and positive semidefinite."""
    return StateVector(u.shape, laplacian_array(u.shape, u.values))


def apply_diff(u: StateVector, axis_j: int, direction: str = "forward") -> StateVector:
    """B_j u (forward) or B_j* u (backward) on the radius M+1 box."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    out = diff_array(u.shape, u.values, axis_j, direction == "forward")
    return StateVector(u.shape.enlarged(), out)


def weighted_norm(u: StateVector, weight: str = "standard", delta: float | None = None) -> float:
    """||u||, ||u||_{ell^2_kappa}, or ||kappa_delta u||."""
    return float(weighted_norm_array(u.shape, u.values, weight, delta))


def tail_mass(u: StateVector, k: float) -> float:
    """sum_{|i| >= k} |u_i|^2; equals ||u||^2 at k = 0."""
    return float(tail_mass_array(u.shape, u.values, k))


def inner(u: StateVector, v: StateVector) -> float:
    """ell^2 inner product; states of different radii pair on the common box."""
    if u.shape.dim != v.shape.dim:
        raise ShapeMismatchError("inner product across lattice dimensions")
    if u.shape.radius < v.shape.radius:
        u = u.embed(v.shape)
    elif v.shape.radius < u.shape.radius:
        v = v.embed(u.shape)
    return float(np.dot(u.values, v.values))
