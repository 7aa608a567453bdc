"""One-dimensional spectral setting for the fractional stochastic diffusion model.

Everything is expressed in the Dirichlet sine basis
``phi_k(x) = sqrt(2/L) sin(k pi x / L)`` on ``(0, L)`` with eigenvalues
``lambda_k = (k pi / L)^2``.  Fields are arrays whose last axis runs over the
first ``K`` modes; leading axes (paths, time) are carried through unchanged.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft

__all__ = [
    "TimeGrid", "SpectralBasis", "QSpectrum", "Nonlinearity", "InitialDatum", "ModelSpec",
    "ModelValidationError", "ValidationReport", "AliasingWarning",
    "build_basis", "frac_norm", "apply_A_power", "synthesize", "project",
    "apply_F", "validate", "kappa", "default_r_target",
    "predicted_order_linear", "predicted_order_nonlinear", "predicted_holder_exponent",
]


class ModelValidationError(ValueError):
    """Raised when a parameter set violates the model's admissibility rules."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class AliasingWarning(UserWarning):
    """Collocation grid too coarse for an alias-free sine round trip."""


# ---------------------------------------------------------------------------
# grids, basis and norms

@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition ``t_m = m T / M`` of ``[0, T]``."""

    T: float
    M: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        object.__setattr__(self, "M", int(self.M))

    @property
    def h(self) -> float:
        return self.T / self.M

    @property
    def times(self) -> np.ndarray:
        """``t_0, ..., t_M``."""
        return np.arange(self.M + 1) * self.h

    def coarsen(self, c) -> "TimeGrid":
        if int(c) != c or c < 1 or self.M % int(c):
            raise ValueError(f"coarsening factor {c} does not divide M = {self.M}")
        return TimeGrid(self.T, self.M // int(c))


@dataclass(frozen=True)
class SpectralBasis:
    """Dirichlet Laplacian eigenvalues on ``(0, L)`` for modes ``1..K``."""

    L: float
    K: int
    eigenvalues: np.ndarray = field(repr=False, compare=False)

    @property
    def modes(self):
        return np.arange(1, self.K + 1)


def build_basis(L, K) -> SpectralBasis:
    """Eigenvalues ``(k pi / L)^2``, ``k = 1..K``.

    >>> build_basis(math.pi, 3).eigenvalues
    array([1., 4., 9.])
    """
    if not (L > 0 and math.isfinite(L)):
        raise ValueError("domain length L must be positive and finite")
    if int(K) != K or K < 1:
        raise ValueError("truncation K must be a positive integer")
    K = int(K)
    lam = (np.arange(1, K + 1) * (math.pi / L)) ** 2
    lam.setflags(write=False)
    return SpectralBasis(float(L), K, lam)


def frac_norm(u, basis: SpectralBasis, w) -> np.ndarray:
    """``(sum_k lambda_k^w u_k^2)^{1/2}`` over the last axis."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.sum(basis.eigenvalues ** w * u * u, axis=-1))


def apply_A_power(u, basis: SpectralBasis, p) -> np.ndarray:
    """Modewise multiplication by ``lambda_k^p``."""
    return np.asarray(u, dtype=float) * basis.eigenvalues ** p


# ---------------------------------------------------------------------------
# physical-space transforms

def synthesize(u, n_x, L) -> np.ndarray:
    """Evaluate ``sum_k u_k phi_k`` at the interior nodes ``x_i = i L / n_x``.

    Returns an array with last axis of length ``n_x - 1`` (``i = 1..n_x-1``).
    """
    u = np.asarray(u, dtype=float)
    K = u.shape[-1]
    n_x = int(n_x)
    if K > n_x - 1:
        raise ValueError(f"n_x = {n_x} cannot represent {K} sine modes")
    if n_x < 2 * K:
        warnings.warn(f"n_x = {n_x} < 2K = {2 * K}: sine round trip may alias",
                      AliasingWarning, stacklevel=2)
    pad = np.zeros(u.shape[:-1] + (n_x - 1,))
    pad[..., :K] = u
    return math.sqrt(2.0 / L) * 0.5 * fft.dst(pad, type=1, axis=-1)


def project(samples, K, L) -> np.ndarray:
    """Trapezoid-consistent sine coefficients of nodal values, first ``K`` modes.

    Exact inverse of :func:`synthesize` on ``K``-mode fields.
    """
    samples = np.asarray(samples, dtype=float)
    n_x = samples.shape[-1] + 1
    if K > n_x - 1:
        raise ValueError(f"{n_x - 1} nodes cannot resolve {K} modes")
    coef = (L / n_x) * math.sqrt(2.0 / L) * 0.5 * fft.dst(samples, type=1, axis=-1)
    return coef[..., :K]


# ---------------------------------------------------------------------------
# model ingredients

@dataclass(frozen=True)
class QSpectrum:
    """Noise covariance eigenvalues: white (``q_k = 1``) or ``lambda_k^{-rho}``."""

    kind: str = "white"
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in ("white", "power_law"):
            raise ValueError(f"unknown q_kind {self.kind!r}")
        if not math.isfinite(self.exponent):
            raise ValueError("q_exponent must be finite")

    def values(self, basis: SpectralBasis) -> np.ndarray:
        if self.kind == "white":
            return np.ones(basis.K)
        return basis.eigenvalues ** (-self.exponent)


_POINTWISE = {
    # name: (f, |f'| bound) built from the parameters (c0, c1)
    "sin_scaled": (lambda u, c0, c1: c1 * np.sin(u), lambda c0, c1: abs(c1)),
    "tanh_scaled": (lambda u, c0, c1: c1 * np.tanh(u), lambda c0, c1: abs(c1)),
    "affine": (lambda u, c0, c1: c0 + c1 * u, lambda c0, c1: abs(c1)),
}


@dataclass(frozen=True)
class Nonlinearity:
    """Drift ``F``: zero, a diagonal linear map ``c u``, or a Nemytskii operator.

    Nemytskii drifts ``u -> f(u(x))`` are evaluated by collocation on ``n_x``
    uniform cells (``None`` means ``4K``).  For ``sin_scaled`` and
    ``tanh_scaled`` the scale is ``c1``; ``affine`` is ``c0 + c1 u``.
    """

    kind: str = "zero"
    f_id: str | None = None
    c0: float = 0.0
    c1: float = 0.0
    n_x: int | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "linear_diagonal", "nemytskii"):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "nemytskii" and self.f_id not in _POINTWISE:
            raise ValueError(f"unknown pointwise function {self.f_id!r}")
        if self.n_x is not None and self.n_x < 2:
            raise ValueError("n_x must be at least 2")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def linear_diagonal(cls, c):
        return cls("linear_diagonal", c1=float(c))

    @classmethod
    def nemytskii(cls, f_id, c=1.0, c0=0.0, n_x=None):
        return cls("nemytskii", f_id=f_id, c0=float(c0), c1=float(c), n_x=n_x)

    @property
    def is_linear(self):
        return self.kind != "nemytskii" or (self.f_id == "affine" and self.c0 == 0.0)

    @property
    def is_zero(self):
        return self.kind == "zero" or (self.kind != "nemytskii" and self.c1 == 0.0)

    @property
    def lipschitz(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear_diagonal":
            return abs(self.c1)
        return _POINTWISE[self.f_id][1](self.c0, self.c1)

    def pointwise(self, v):
        """Apply the scalar Nemytskii function to physical samples."""
        return _POINTWISE[self.f_id][0](np.asarray(v, dtype=float), self.c0, self.c1)


@dataclass(frozen=True)
class InitialDatum:
    """Initial coefficients: zero, a single mode, or ``x0_k = k^{-p}``."""

    kind: str = "smooth_decay"
    p: float | None = None
    k0: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "mode", "smooth_decay"):
            raise ValueError(f"unknown initial datum kind {self.kind!r}")
        if self.kind == "mode" and self.k0 < 1:
            raise ValueError("mode index must be >= 1")

    def decay(self, beta) -> float:
        return 2.0 * beta + 0.6 if self.p is None else float(self.p)

    def coefficients(self, K, beta) -> np.ndarray:
        x0 = np.zeros(K)
        if self.kind == "mode":
            if self.k0 <= K:
                x0[self.k0 - 1] = self.amplitude
        elif self.kind == "smooth_decay":
            x0 = np.arange(1, K + 1, dtype=float) ** (-self.decay(beta))
        return x0


def kappa(alpha, beta, gamma, epsilon0=1e-3) -> float:
    """Spatial regularity budget of the stochastic convolution."""
    return min((alpha + gamma - 0.5) * 2.0 * beta / alpha, 2.0 * beta) - epsilon0


def default_r_target(alpha, beta, gamma, q: QSpectrum, epsilon0=1e-3) -> float:
    """Largest admissible ``r`` backed off by 0.1.

    For ``q_k = lambda_k^{-rho}`` in one dimension the trace condition reads
    ``r < kappa + rho - 1/2``; white noise is ``rho = 0``.
    """
    kap = kappa(alpha, beta, gamma, epsilon0)
    rho = q.exponent if q.kind == "power_law" else 0.0
    return min(kap, kap + rho - 0.5 - 0.1)


@dataclass(frozen=True)
class ModelSpec:
    """Continuous-problem parameters.

    ``r_target`` of ``None`` selects :func:`default_r_target`.  Construction
    does not enforce admissibility (classical ``alpha = 1`` checks rely on
    that); call :func:`validate` for the full rule set.
    """

    alpha: float = 0.5
    beta: float = 1.0
    gamma: float = 0.5
    domain_length: float = 1.0
    truncation: int = 32
    horizon: float = 1.0
    q_spectrum: QSpectrum = QSpectrum()
    nonlinearity: Nonlinearity = Nonlinearity()
    initial: InitialDatum = InitialDatum()
    r_target: float | None = None
    epsilon0: float = 1e-3

    @property
    def K(self):
        return self.truncation

    @property
    def L(self):
        return self.domain_length

    @property
    def T(self):
        return self.horizon

    @cached_property
    def basis(self) -> SpectralBasis:
        return build_basis(self.domain_length, self.truncation)

    @property
    def lam_beta(self) -> np.ndarray:
        """``lambda_k^beta`` per mode."""
        return self.basis.eigenvalues ** self.beta

    @property
    def q(self) -> np.ndarray:
        return self.q_spectrum.values(self.basis)

    @property
    def x0(self) -> np.ndarray:
        return self.initial.coefficients(self.truncation, self.beta)

    @property
    def n_x(self) -> int:
        n = self.nonlinearity.n_x
        return 4 * self.truncation if n is None else int(n)

    def kappa(self) -> float:
        return kappa(self.alpha, self.beta, self.gamma, self.epsilon0)

    @property
    def r(self) -> float:
        if self.r_target is not None:
            return float(self.r_target)
        return default_r_target(self.alpha, self.beta, self.gamma, self.q_spectrum, self.epsilon0)


def apply_F(u, spec: ModelSpec) -> np.ndarray:
    """Drift in coefficient space; the last axis of ``u`` holds the modes."""
    u = np.asarray(u, dtype=float)
    nl = spec.nonlinearity
    if nl.kind == "zero":
        return np.zeros_like(u)
    if nl.kind == "linear_diagonal":
        return nl.c1 * u
    vals = synthesize(u, spec.n_x, spec.domain_length)
    return project(nl.pointwise(vals), u.shape[-1], spec.domain_length)


# ---------------------------------------------------------------------------
# predicted exponents (epsilon set to zero)

def predicted_order_linear(spec: ModelSpec) -> float:
    a, b, g, r = spec.alpha, spec.beta, spec.gamma, spec.r
    return min(a + a * r / (2 * b) + max(g - 0.5, 0.0), a + g, 1.0)


def predicted_order_nonlinear(spec: ModelSpec) -> float:
    a, b, g, r = spec.alpha, spec.beta, spec.gamma, spec.r
    kap = spec.kappa()
    if math.isclose(a + g, 1.0, rel_tol=0.0, abs_tol=1e-12):
        return a * r / b + min(0.5 - a * kap / (2 * b), 2 * max(g - 0.5, 0.0))
    return min(a / (2 * b) * min(kap, 2 * r) + max(g - 0.5, 0.0), 1.0)


def predicted_holder_exponent(spec: ModelSpec) -> float:
    a, b, g, r = spec.alpha, spec.beta, spec.gamma, spec.r
    return min(a, a * r / (2 * b) + max(g - 0.5, 0.0))


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class ValidationReport:
    kappa: float
    r_target: float
    r_max: float
    r_max_strict: bool
    predicted_linear: float
    predicted_nonlinear: float | None
    predicted_holder: float

    def lines(self):
        op = "<" if self.r_max_strict else "<="
        out = [
            f"kappa = {self.kappa:.6g}",
            f"admissible r: 0 < r {op} {self.r_max:.6g}",
            f"r_target = {self.r_target:.6g}",
            f"predicted order (linear F) = {self.predicted_linear:.6g}",
        ]
        if self.predicted_nonlinear is not None:
            out.append(f"predicted order (nonlinear F) = {self.predicted_nonlinear:.6g}")
        out.append(f"predicted Hoelder exponent = {self.predicted_holder:.6g}")
        return out


def validate(spec: ModelSpec) -> ValidationReport:
    """Check admissibility and report the derived quantities.

    Raises :class:`ModelValidationError` listing every violated rule.
    """
    bad = []
    a, b, g = spec.alpha, spec.beta, spec.gamma
    if not (0.0 < a < 1.0):
        bad.append("alpha must lie in (0,1)")
    if not (0.0 < b <= 1.0):
        bad.append("beta must lie in (0,1]")
    if not (0.0 <= g <= 1.0):
        bad.append("gamma must lie in [0,1]")
    if not (spec.domain_length > 0):
        bad.append("L must be positive")
    if not (spec.horizon > 0):
        bad.append("T must be positive")
    if int(spec.truncation) != spec.truncation or spec.truncation < 1:
        bad.append("K must be a positive integer")
    if not (spec.epsilon0 > 0):
        bad.append("epsilon0 must be positive")
    if bad:
        raise ModelValidationError(bad)
    if a + g <= 0.5:
        bad.append(f"alpha + gamma must exceed 1/2 for the noise to be admissible "
                   f"(got {a + g:.6g})")
        raise ModelValidationError(bad)
    kap = spec.kappa()
    if kap <= 0:
        bad.append(f"kappa = {kap:.6g} must be positive (reduce epsilon0)")
    white = spec.q_spectrum.kind == "white"
    rho = 0.0 if white else spec.q_spectrum.exponent
    trace_bound = kap + rho - 0.5
    r_max, strict = (trace_bound, True) if trace_bound < kap else (kap, False)
    r = spec.r
    if not (r > 0):
        bad.append(f"r_target = {r:.6g} must be positive")
    elif r > kap:
        bad.append(f"r_target = {r:.6g} exceeds kappa = {kap:.6g}")
    elif strict and r >= r_max:
        bad.append(f"r_target = {r:.6g} must be below {r_max:.6g} "
                   f"for the noise trace condition")
    if spec.initial.kind == "smooth_decay" and spec.initial.decay(b) <= 2 * b + 0.5:
        bad.append(f"x0_p must exceed 2*beta + 1/2 = {2 * b + 0.5:.6g}")
    if spec.q_spectrum.kind == "power_law" and np.any(spec.q < 0):
        bad.append("q_k must be nonnegative")
    if bad:
        raise ModelValidationError(bad)
    nonlin = None
    if b > 0.5:
        nonlin = predicted_order_nonlinear(spec)
    return ValidationReport(kap, r, r_max, strict, predicted_order_linear(spec), nonlin,
                            predicted_holder_exponent(spec))
