"""Deterministic solvers for the limit equation and the controlled equation.

The integrator is the classical 4th-order one-step scheme; accuracy here
bounds the quality of every action evaluation built on top of it.  With the
control absent the controlled equation reduces to the limit equation through
the same code path.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import NoConvergence, newton_krylov

from .controls import ControlPath
from .lattice import ShapeMismatchError, StateVector
from .model import ModelParams
from .trajectory import Trajectory

__all__ = ["solve_limit", "solve_controlled", "find_equilibrium", "EquilibriumError"]


class EquilibriumError(RuntimeError):
    """Equilibrium residual tolerance not reached within the search budget."""


def rhs_array(p: ModelParams, u: np.ndarray, h_vec: np.ndarray | None) -> np.ndarray:
    """drift(u) + sigma(u) h for values of shape (..., site_count)."""
    out = p.drift_array(u)
    if h_vec is not None:
        out += p.sigma_array(u, h_vec)
    return out


def rk4_step(p: ModelParams, u: np.ndarray, dt: float, h_vec: np.ndarray | None = None) -> np.ndarray:
    """One classical Runge-Kutta step; h is held constant across the step."""
    k1 = rhs_array(p, u, h_vec)
    k2 = rhs_array(p, u + 0.5 * dt * k1, h_vec)
    k3 = rhs_array(p, u + 0.5 * dt * k2, h_vec)
    k4 = rhs_array(p, u + dt * k3, h_vec)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_grid(t_end: float, dt: float) -> int:
    n = int(round(t_end / dt))
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end = {t_end} is not an integer multiple of dt = {dt}")
    return n


def integrate_array(
    p: ModelParams,
    u0: np.ndarray,
    t_end: float,
    dt: float,
    control: ControlPath | None = None,
    save_stride: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """RK4 time grid at array level; returns (times, states (..., n_saved, S)).

    Broadcasts over leading axes of u0.  With a control, dt must divide the
    control grid spacing so each step sees a single constant control value.
    """
    n_steps = _check_grid(t_end, dt)
    if control is not None:
        if control.t_end < t_end - 1e-9:
            raise ValueError("control not defined on the whole horizon")
        per = control.dt / dt
        if abs(per - round(per)) > 1e-9 or round(per) < 1:
            raise ValueError(
                f"dt = {dt} does not divide the control grid spacing {control.dt}"
            )
    u = np.asarray(u0, dtype=float).copy()
    saved = [u.copy()]
    times = [0.0]
    for n in range(n_steps):
        h_vec = control.value_at(n * dt) if control is not None else None
        u = rk4_step(p, u, dt, h_vec)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"non-finite state at step {n + 1} (t = {(n + 1) * dt:g})")
        if (n + 1) % save_stride == 0 or n + 1 == n_steps:
            saved.append(u.copy())
            times.append((n + 1) * dt)
    return np.array(times), np.stack(saved, axis=-2)


def solve_limit(
    p: ModelParams, u0: StateVector, t_end: float, dt: float, save_stride: int = 1
) -> Trajectory:
    """Integrate du/dt + lambda u + A u + f(u) = g from u0."""
    if u0.shape != p.shape:
        raise ShapeMismatchError("initial state does not match the model lattice")
    times, states = integrate_array(p, u0.values, t_end, dt, None, save_stride)
    return Trajectory(p.shape, times, states)


def solve_controlled(
    p: ModelParams, u0: StateVector, h: ControlPath, dt: float, save_stride: int = 1
) -> Trajectory:
    """Integrate du/dt + lambda u + A u + f(u) = g + sigma(u) h from u0."""
    if u0.shape != p.shape:
        raise ShapeMismatchError("initial state does not match the model lattice")
    if h.shape != p.shape:
        raise ShapeMismatchError("control does not match the model lattice")
    times, states = integrate_array(p, u0.values, h.t_end, dt, h, save_stride)
    return Trajectory(p.shape, times, states)


def find_equilibrium(
    p: ModelParams,
    t_integrate: float = 200.0,
    newton_steps: int = 50,
    residual_tol: float = 1e-10,
    dt: float | None = None,
) -> StateVector:
    """The unique equilibrium u* of the limit equation under lambda > gamma.

    Long integration rides the contraction into the attractor basin, then a
    Newton-Krylov polish (finite-difference Jacobian-vector products with
    damping, never forming the dense Jacobian) drives the drift residual to
    ``residual_tol`` in ell^2.
    """
    if not p.strong_dissipativity:
        raise ValueError("find_equilibrium requires lambda > gamma")
    dt = min(p.dt_max, 0.05) if dt is None else dt
    n = int(round(t_integrate / dt))
    u = np.zeros(p.shape.site_count)
    for _ in range(n):
        u = rk4_step(p, u, dt)
    if not np.all(np.isfinite(u)):
        raise EquilibriumError("long integration diverged; check lambda > gamma numerically")

    res = float(np.linalg.norm(p.drift_array(u)))
    if res > residual_tol:
        try:
            u = newton_krylov(
                p.drift_array,
                u,
                f_tol=residual_tol / (2.0 * np.sqrt(p.shape.site_count)),
                maxiter=newton_steps,
            )
        except NoConvergence as exc:
            raise EquilibriumError(
                f"Newton polish did not reach residual {residual_tol:g} "
                f"within {newton_steps} steps"
            ) from exc
    res = float(np.linalg.norm(p.drift_array(u)))
    if not np.isfinite(res) or res > residual_tol:
        raise EquilibriumError(f"equilibrium residual {res:.3g} exceeds {residual_tol:g}")
    return StateVector(p.shape, u)
