"""Stochastic time integration with reproducible counter-based noise.

Noise draws are a pure function of ``(base_seed, path_index, step_index,
site_index)``: each draw maps to a fixed 64-bit word of a Philox-4x64
counter stream (one word per normal, inverse-CDF transform), so ensembles
may be split across any number of workers and re-assembled bit-identically.
Coupled trajectory pairs share one stream.

Only the retained lattice modes are driven -- for the diagonal diffusion
family, sigma(u) dW depends on no other coordinates of the cylindrical
process -- so one Brownian increment per site per step suffices.

The explicit scheme is Euler-Maruyama; the tamed variant divides the
sitewise nonlinearity by ``1 + dt ||f(u)||`` to keep superlinear drifts
(cubic f) from exploding.  The default resolves to tamed whenever f is not
identically zero.  At ``eps = 0`` stepping delegates to the deterministic
4th-order one-step map so the zero-noise path coincides with the
deterministic solver on the same grid (the documented degeneracy), instead
of leaving an O(dt) Euler gap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .controls import ControlPath
from .lattice import ShapeMismatchError, StateVector, laplacian_array
from .model import ModelParams
from .skeleton import rk4_step
from .trajectory import Trajectory

__all__ = [
    "SimConfig",
    "NoiseField",
    "draw_increment",
    "simulate_path",
    "simulate_coupled",
    "CoupledResult",
    "InstabilityError",
]

_PHILOX_SALT = 0x9E3779B97F4A7C15  # fixed second key word; versioned with the stream layout


class InstabilityError(FloatingPointError):
    """A path produced a non-finite state; carries the offending step."""

    def __init__(self, step: int, t: float, scheme: str):
        self.step = step
        self.t = t
        super().__init__(
            f"non-finite state at step {step} (t = {t:g}) under scheme {scheme!r}; "
            "reduce dt or switch to tamed_euler"
        )


class NoiseField:
    """Word-addressable standard normals keyed by (seed, path, step, site).

    Layout: at time step ``n`` the Philox counter block ``[*, 0, n, 0]``
    holds ``4*ceil(S/4)`` words per path, path blocks contiguous in the
    low counter word.  One word = one normal via the inverse CDF, so any
    (path range, step) rectangle can be generated independently.
    """

    def __init__(self, base_seed: int, site_count: int):
        self.base_seed = int(base_seed) & 0xFFFFFFFFFFFFFFFF
        self.site_count = int(site_count)
        self._counters_per_path = (self.site_count + 3) // 4
        self._key = np.array([self.base_seed, _PHILOX_SALT], dtype=np.uint64)

    def _raw(self, step: int, c0: int, n_words: int) -> np.ndarray:
        counter = np.array([c0, 0, step, 0], dtype=np.uint64)
        return Philox(key=self._key, counter=counter).random_raw(n_words)

    @staticmethod
    def _to_normal(words: np.ndarray) -> np.ndarray:
        u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        return ndtri(u)

    def normals(self, step: int, path_lo: int, path_hi: int) -> np.ndarray:
        """Standard normals for paths [path_lo, path_hi), shape (P, site_count)."""
        n_paths = path_hi - path_lo
        c = self._counters_per_path
        words = self._raw(step, path_lo * c, n_paths * 4 * c).reshape(n_paths, 4 * c)
        return self._to_normal(words[:, : self.site_count])

    def normal_one(self, path_index: int, step_index: int, site_index: int) -> float:
        c0 = path_index * self._counters_per_path + site_index // 4
        words = self._raw(step_index, c0, 4)
        return float(self._to_normal(words[site_index % 4 : site_index % 4 + 1])[0])


def draw_increment(
    base_seed: int,
    path_index: int,
    step_index: int,
    site_index: int,
    *,
    site_count: int = 1,
    dt: float = 1.0,
) -> float:
    """Deterministic N(0, dt) increment from the counter-based stream.

    Pure function of the key tuple -- no sequential state.  ``site_count``
    fixes the per-step block layout and must match the lattice the stream
    drives (draws for site s of an S-site lattice sit at different words
    than for an S'-site one).
    """
    if min(path_index, step_index, site_index) < 0:
        raise ValueError("path, step and site indices must be nonnegative")
    if site_index >= site_count:
        raise ValueError(f"site index {site_index} outside block of {site_count}")
    z = NoiseField(base_seed, site_count).normal_one(path_index, step_index, site_index)
    return float(np.sqrt(dt)) * z


@dataclass(frozen=True)
class SimConfig:
    """Time grid, ensemble size and noise stream for stochastic runs."""

    dt: float
    t_end: float
    n_paths: int = 1
    base_seed: int = 0
    scheme: str = "auto"  # auto -> tamed_euler when f != 0, else euler_maruyama
    save_stride: int = 1

    _SCHEMES = ("auto", "euler_maruyama", "tamed_euler")

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be a positive integer")
        if self.save_stride < 1:
            raise ValueError("save_stride must be a positive integer")
        if self.scheme not in self._SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        n = self.t_end / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"t_end/dt = {n} does not round to an integer step count")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def saved_steps(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.save_stride)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps

    def saved_times(self) -> np.ndarray:
        return self.saved_steps() * self.dt

    def validate(self, p: ModelParams) -> None:
        if self.dt > p.dt_max * (1 + 1e-12):
            raise ValueError(
                f"dt = {self.dt:g} exceeds the stability guard "
                f"dt_max = {p.dt_max:g} (0.5/(lambda + 4N))"
            )

    def resolved_scheme(self, p: ModelParams) -> str:
        if self.scheme != "auto":
            return self.scheme
        return "euler_maruyama" if p.f.is_zero else "tamed_euler"

    def with_paths(self, n_paths: int) -> "SimConfig":
        return replace(self, n_paths=n_paths)


def _control_values(p: ModelParams, cfg: SimConfig, control: ControlPath | None) -> np.ndarray | None:
    if control is None:
        return None
    if control.shape != p.shape:
        raise ShapeMismatchError("control does not match the model lattice")
    if control.t_end < cfg.t_end - 1e-9:
        raise ValueError("control not defined on the whole horizon [0, t_end]")
    return np.stack([control.value_at(n * cfg.dt) for n in range(cfg.n_steps)])


def iterate_batch(
    p: ModelParams,
    u0_values: np.ndarray,
    cfg: SimConfig,
    control: ControlPath | None = None,
    path_lo: int = 0,
):
    """Advance a batch of paths; yields (save_slot, step, state view (P, S)).

    Row i of ``u0_values`` is path ``path_lo + i`` of the stream; the yielded
    array is reused between steps, so consumers keep copies.  Per-path noise
    depends only on (base_seed, path index, step, site), never on the batch
    split.
    """
    cfg.validate(p)
    u = np.array(u0_values, dtype=float, ndmin=2, copy=True)
    n_batch = u.shape[0]
    scheme = cfg.resolved_scheme(p)
    tamed = scheme == "tamed_euler"
    dt = cfg.dt
    h_values = _control_values(p, cfg, control)
    deterministic = p.eps == 0.0
    noise = None if deterministic else NoiseField(cfg.base_seed, p.shape.site_count)
    sqrt_eps_dt = np.sqrt(p.eps * dt)
    save_set = set(int(s) for s in cfg.saved_steps())

    slot = 0
    if 0 in save_set:
        yield slot, 0, u
        slot += 1
    for n in range(cfg.n_steps):
        h_vec = None if h_values is None else h_values[n]
        if deterministic:
            u = rk4_step(p, u, dt, h_vec)
        else:
            out = -p.lam * u
            out -= laplacian_array(p.shape, u)
            out += p.g.values
            if not p.f.is_zero:
                fu = p.f(u)
                if tamed:
                    fnorm = np.linalg.norm(fu, axis=-1, keepdims=True)
                    fu = fu / (1.0 + dt * fnorm)
                out -= fu
            if h_vec is not None:
                out += p.sigma_array(u, h_vec)
            dW = sqrt_eps_dt * noise.normals(n, path_lo, path_lo + n_batch)
            u = u + dt * out + p.sigma_array(u, dW)
        if not np.all(np.isfinite(u)):
            raise InstabilityError(n + 1, (n + 1) * dt, scheme)
        if (n + 1) in save_set:
            yield slot, n + 1, u
            slot += 1


def simulate_path(
    p: ModelParams,
    u0: StateVector,
    cfg: SimConfig,
    control: ControlPath | None = None,
    path_index: int = 0,
) -> Trajectory:
    """One trajectory of the (controlled) stochastic system."""
    if u0.shape != p.shape:
        raise ShapeMismatchError("initial state does not match the model lattice")
    times = cfg.saved_times()
    states = np.empty((times.size, p.shape.site_count))
    for slot, _, u in iterate_batch(p, u0.values[None, :], cfg, control, path_index):
        states[slot] = u[0]
    return Trajectory(p.shape, times, states, seed=cfg.base_seed, path_index=path_index)


@dataclass
class CoupledResult:
    """Two trajectories driven by identical increments, plus their gap."""

    first: Trajectory
    second: Trajectory
    diff_sq: np.ndarray  # ||difference||^2 at each saved time

    @property
    def times(self) -> np.ndarray:
        return self.first.times


def iterate_coupled_batch(
    p: ModelParams,
    u0_a: np.ndarray,
    u0_b: np.ndarray,
    cfg: SimConfig,
    path_lo: int = 0,
):
    """Synchronously coupled pair batches; yields (slot, step, u_a, u_b)."""
    cfg.validate(p)
    ua = np.array(u0_a, dtype=float, ndmin=2, copy=True)
    ub = np.array(u0_b, dtype=float, ndmin=2, copy=True)
    if ua.shape != ub.shape:
        raise ShapeMismatchError("coupled initial batches must have equal shapes")
    n_batch = ua.shape[0]
    scheme = cfg.resolved_scheme(p)
    tamed = scheme == "tamed_euler"
    dt = cfg.dt
    deterministic = p.eps == 0.0
    noise = None if deterministic else NoiseField(cfg.base_seed, p.shape.site_count)
    sqrt_eps_dt = np.sqrt(p.eps * dt)
    save_set = set(int(s) for s in cfg.saved_steps())

    def em(u, dW):
        out = p.drift_array(u)
        if tamed and not p.f.is_zero:
            fu = p.f(u)
            fnorm = np.linalg.norm(fu, axis=-1, keepdims=True)
            out += fu - fu / (1.0 + dt * fnorm)
        return u + dt * out + p.sigma_array(u, dW)

    slot = 0
    if 0 in save_set:
        yield slot, 0, ua, ub
        slot += 1
    for n in range(cfg.n_steps):
        if deterministic:
            ua = rk4_step(p, ua, dt)
            ub = rk4_step(p, ub, dt)
        else:
            dW = sqrt_eps_dt * noise.normals(n, path_lo, path_lo + n_batch)
            ua = em(ua, dW)
            ub = em(ub, dW)
        if not (np.all(np.isfinite(ua)) and np.all(np.isfinite(ub))):
            raise InstabilityError(n + 1, (n + 1) * dt, scheme)
        if (n + 1) in save_set:
            yield slot, n + 1, ua, ub
            slot += 1


def simulate_coupled(
    p: ModelParams,
    u0_a: StateVector,
    u0_b: StateVector,
    cfg: SimConfig,
    path_index: int = 0,
) -> CoupledResult:
    """Two paths from different initial states under the same noise stream."""
    if u0_a.shape != p.shape or u0_b.shape != p.shape:
        raise ShapeMismatchError("initial states do not match the model lattice")
    times = cfg.saved_times()
    sa = np.empty((times.size, p.shape.site_count))
    sb = np.empty_like(sa)
    for slot, _, ua, ub in iterate_coupled_batch(
        p, u0_a.values[None, :], u0_b.values[None, :], cfg, path_index
    ):
        sa[slot] = ua[0]
        sb[slot] = ub[0]
    diff_sq = np.sum((sa - sb) ** 2, axis=-1)
    return CoupledResult(
        Trajectory(p.shape, times, sa, cfg.base_seed, path_index),
        Trajectory(p.shape, times, sb, cfg.base_seed, path_index),
        diff_sq,
    )
