"""Drift, nonlinearity and diffusion coefficients with hypothesis validators.

The drift is ``-lambda u - A u - f(u) + g`` with one scalar nonlinearity f
applied sitewise, and the diffusion is the diagonal family
``sigma(u) v = (1 + ||u||)^{-1} a (.) v`` (``normalized_diagonal``) or its
state-independent variant ``a (.) v`` (``constant_diagonal``).  Both satisfy
the dissipativity and Hilbert-Schmidt hypotheses with
``L_sigma = ||a||_{ell^2_kappa}``; the constant variant additionally has
Lipschitz constant zero, which unlocks exact Gaussian oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    LatticeShape,
    ShapeMismatchError,
    StateVector,
    laplacian_array,
    weighted_norm_array,
)

__all__ = [
    "NonlinearitySpec",
    "DiffusionSpec",
    "ModelParams",
    "ValidationReport",
    "drift_eval",
    "sigma_apply",
    "sigma_hs_norm",
    "validate_params",
    "make_profile",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    """Sitewise odd-polynomial nonlinearity f.

    kinds: ``zero``; ``cubic`` (f(s) = s^3); ``cubic_shifted`` (f(s) = s^3
    - gamma_shift*s, kept only to exercise the validator -- any positive
    shift violates the sign condition f(s)s >= 0 near 0); and
    ``odd_polynomial`` with coefficients (c_0, c_1, ...) meaning
    f(s) = sum_k c_k s^(2k+1).
    """

    kind: str = "zero"
    gamma_shift: float = 0.0
    coefficients: tuple[float, ...] = ()

    _KINDS = ("zero", "cubic", "cubic_shifted", "odd_polynomial")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "cubic_shifted" and self.gamma_shift < 0:
            raise ValueError("gamma_shift must be >= 0")

    def odd_coefficients(self) -> tuple[float, ...]:
        """Coefficients c_k of s^(2k+1)."""
        if self.kind == "zero":
            return ()
        if self.kind == "cubic":
            return (0.0, 1.0)
        if self.kind == "cubic_shifted":
            return (-self.gamma_shift, 1.0)
        return tuple(self.coefficients)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        s2 = s * s
        for c in reversed(self.odd_coefficients()):
            out = out * s2 + c
        return out * s

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        s2 = s * s
        for k, c in reversed(list(enumerate(self.odd_coefficients()))):
            out = out * s2 + (2 * k + 1) * c
        return out

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.odd_coefficients())


@dataclass(frozen=True)
class DiffusionSpec:
    """Diagonal diffusion with coefficient sequence a.

    ``normalized_diagonal``: sigma(u) v = (1+||u||)^{-1} sum_i a_i v_i e_i.
    ``constant_diagonal``:   sigma(u) v = sum_i a_i v_i e_i.
    """

    kind: str
    a: StateVector

    _KINDS = ("normalized_diagonal", "constant_diagonal")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown diffusion kind {self.kind!r}")

    def prefactor(self, u_norm):
        """State-dependent scalar multiplying the diagonal."""
        if self.kind == "normalized_diagonal":
            return 1.0 / (1.0 + np.asarray(u_norm, dtype=float))
        return np.ones_like(np.asarray(u_norm, dtype=float))

    @property
    def lipschitz_bound(self) -> float:
        """Lipschitz constant of u -> sigma(u) in Hilbert-Schmidt norm."""
        if self.kind == "normalized_diagonal":
            return float(np.linalg.norm(self.a.values))
        return 0.0


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the lattice system and its controlled skeletons."""

    shape: LatticeShape
    lam: float
    gamma: float
    g: StateVector
    f: NonlinearitySpec
    sigma: DiffusionSpec
    eps: float = 0.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.eps}")
        for name, sv in (("g", self.g), ("sigma.a", self.sigma.a)):
            if sv.shape != self.shape:
                raise ShapeMismatchError(f"{name} lives on {sv.shape}, model on {self.shape}")

    @property
    def strong_dissipativity(self) -> bool:
        """lambda > gamma: singleton attractor / unique-invariant-measure regime."""
        return self.lam > self.gamma

    @property
    def L_sigma(self) -> float:
        """||a||_{ell^2_kappa}, the uniform Hilbert-Schmidt bound of sigma."""
        return float(weighted_norm_array(self.shape, self.sigma.a.values, "kappa"))

    @property
    def dt_max(self) -> float:
        """Explicit-scheme step guard 0.5 / (lambda + 4N)."""
        return 0.5 / (self.lam + 4.0 * self.shape.dim)

    def with_eps(self, eps: float) -> "ModelParams":
        return ModelParams(self.shape, self.lam, self.gamma, self.g, self.f, self.sigma, eps)

    # -- array-level evaluations (values of shape (..., site_count)) --------

    def drift_array(self, values: np.ndarray) -> np.ndarray:
        """-lambda u - A u - f(u) + g."""
        values = np.asarray(values, dtype=float)
        out = -self.lam * values
        out -= laplacian_array(self.shape, values)
        if not self.f.is_zero:
            out -= self.f(values)
        out += self.g.values
        return out

    def sigma_array(self, u_values: np.ndarray, v_values: np.ndarray) -> np.ndarray:
        """sigma(u) v rows; u and v broadcast over leading axes."""
        u_values = np.asarray(u_values, dtype=float)
        v_values = np.asarray(v_values, dtype=float)
        pref = self.sigma.prefactor(np.linalg.norm(u_values, axis=-1))
        return pref[..., None] * self.sigma.a.values * v_values


def drift_eval(p: ModelParams, u: StateVector) -> StateVector:
    """Drift of the lattice system at u."""
    if u.shape != p.shape:
        raise ShapeMismatchError(f"state on {u.shape}, model on {p.shape}")
    return StateVector(p.shape, p.drift_array(u.values))


def sigma_apply(p: ModelParams, u: StateVector, v: StateVector) -> StateVector:
    """Diagonal diffusion action sigma(u) v."""
    if u.shape != p.shape or v.shape != p.shape:
        raise ShapeMismatchError("sigma_apply: state shapes do not match the model")
    return StateVector(p.shape, p.sigma_array(u.values, v.values))


def sigma_hs_norm(p: ModelParams, u: StateVector, weighted: bool = False) -> float:
    """Hilbert-Schmidt norm of sigma(u), into ell^2 or ell^2_kappa."""
    if u.shape != p.shape:
        raise ShapeMismatchError("sigma_hs_norm: state shape does not match the model")
    base = (
        weighted_norm_array(p.shape, p.sigma.a.values, "kappa")
        if weighted
        else np.linalg.norm(p.sigma.a.values)
    )
    return float(p.sigma.prefactor(u.norm()) * base)


# ---------------------------------------------------------------------------
# Hypothesis validation.
# ---------------------------------------------------------------------------


@dataclass
class ConditionResult:
    name: str
    passed: bool
    detail: str = ""
    witness: float | None = None


@dataclass
class ValidationReport:
    conditions: list[ConditionResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failures(self) -> list[ConditionResult]:
        return [c for c in self.conditions if not c.passed]

    def __str__(self) -> str:
        lines = []
        for c in self.conditions:
            status = "pass" if c.passed else "FAIL"
            msg = f"  [{status}] {c.name}"
            if c.detail:
                msg += f": {c.detail}"
            lines.append(msg)
        return "\n".join(lines)


def validate_params(
    p: ModelParams,
    grid_halfwidth: float = 10.0,
    grid_step: float = 1e-3,
    tol: float = 1e-8,
) -> ValidationReport:
    """Certify the standing hypotheses on a finite grid.

    Checks, in order: f(0) = 0 exactly; f(s)s >= 0 on the grid; the central
    finite-difference slope of f stays >= -gamma - tol; ||a||_kappa finite;
    epsilon in [0, 1]; and reports whether lambda > gamma holds (informative
    for the checks that require it, not a hard failure).
    """
    rep = ValidationReport()
    n = max(3, int(round(2 * grid_halfwidth / grid_step)) + 1)
    s = np.linspace(-grid_halfwidth, grid_halfwidth, n)

    f0 = float(p.f(0.0))
    rep.conditions.append(
        ConditionResult("f(0) = 0", f0 == 0.0, detail=f"f(0) = {f0!r}")
    )

    fs = p.f(s)
    sign = fs * s
    bad = np.where(sign < 0.0)[0]
    if bad.size:
        w = float(s[bad[np.argmin(sign[bad])]])
        rep.conditions.append(
            ConditionResult(
                "f(s)s >= 0",
                False,
                detail=f"violated at s = {w:g} where f(s)s = {float(p.f(w) * w):.6g}",
                witness=w,
            )
        )
    else:
        rep.conditions.append(ConditionResult("f(s)s >= 0", True))

    slope = (fs[2:] - fs[:-2]) / (s[2:] - s[:-2])
    bad = np.where(slope < -p.gamma - tol)[0]
    if bad.size:
        w = float(s[1:-1][bad[np.argmin(slope[bad])]])
        rep.conditions.append(
            ConditionResult(
                "f'(s) >= -gamma",
                False,
                detail=f"slope {float(np.min(slope)):.6g} < -gamma = {-p.gamma:g} near s = {w:g}",
                witness=w,
            )
        )
    else:
        rep.conditions.append(ConditionResult("f'(s) >= -gamma", True))

    L = p.L_sigma
    rep.conditions.append(
        ConditionResult(
            "||a||_kappa finite",
            bool(np.isfinite(L)),
            detail=f"L_sigma = {L:.6g}",
        )
    )

    rep.conditions.append(
        ConditionResult(
            "epsilon in [0,1]",
            0.0 <= p.eps <= 1.0,
            detail=f"epsilon = {p.eps:g}",
        )
    )

    rep.conditions.append(
        ConditionResult(
            "lambda > gamma (strong dissipativity)",
            p.strong_dissipativity,
            detail=f"lambda = {p.lam:g}, gamma = {p.gamma:g}"
            + ("" if p.strong_dissipativity else " (checks that need the contraction will refuse)"),
        )
    )
    return rep


# ---------------------------------------------------------------------------
# Named coefficient profiles (used by configs for a and g).
# ---------------------------------------------------------------------------


def make_profile(shape: LatticeShape, name: str, args: tuple = ()) -> StateVector:
    """Generate a coefficient sequence from a named profile.

    ``zero``; ``single_site(i, value)`` with i a site (int for N=1, tuple
    otherwise); ``power_decay(c, p)`` meaning ``a_i = c (1+|i|)^{-p}`` with
    |i| the Euclidean multi-index norm; ``constant(c)``.
    """
    if name == "zero":
        return StateVector.zeros(shape)
    if name == "constant":
        (c,) = args
        return StateVector(shape, np.full(shape.site_count, float(c)))
    if name == "single_site":
        site, value = args
        if np.isscalar(site):
            site = (int(site),) * shape.dim if shape.dim > 1 else (int(site),)
        v = np.zeros(shape.site_count)
        v[shape.site_to_index(site)] = float(value)
        return StateVector(shape, v)
    if name == "power_decay":
        c, pw = args
        r = shape.site_radii()
        return StateVector(shape, float(c) * (1.0 + r) ** (-float(pw)))
    raise ValueError(f"unknown profile {name!r}")
