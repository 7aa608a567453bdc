"""Diagonal solution operators and their exact time integrals.

For a mode with ``mu = lambda^beta`` the scalar kernel is

    s_eta(t) = t^{alpha+eta-1} E_{alpha,alpha+eta}(-mu t^alpha),

and its primitive is ``t^{alpha+eta} E_{alpha,alpha+eta+1}(-mu t^alpha)``.
Vectorised routines take ``mu`` as an array over modes and use the shared
Mittag-Leffler tables; scalar routines go through the exact evaluator.
"""
from __future__ import annotations

import numpy as np

from .mittag_leffler import DEFAULT_CONFIG, MLConfig, ml, ml_antiderivative_scalar, ml_neg
from .model import ModelSpec

__all__ = [
    "s_eta_scalar", "s_eta", "antiderivative", "apply_S", "conv_weight", "interval_weights", "step_weights",
    "operator_bound_exponent", "operator_bound_slope", "DegenerateFitError", "loglog_fit",
]


class DegenerateFitError(ValueError):
    """Too few usable points for a log-log fit."""


def loglog_fit(x, y, min_points=3):
    """Least-squares slope and R^2 of ``ln y`` against ``ln x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < min_points:
        raise DegenerateFitError(f"need at least {min_points} positive points, got {keep.sum()}")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def s_eta_scalar(alpha, beta, eta, lam, t, cfg: MLConfig = DEFAULT_CONFIG) -> float:
    """``t^{alpha+eta-1} E_{alpha,alpha+eta}(-lam^beta t^alpha)`` for ``t > 0``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    b = alpha + eta
    return t ** (b - 1.0) * ml(alpha, b, -(lam ** beta) * t ** alpha, cfg)


def s_eta(alpha, eta, mu, t, fast=True):
    """Vectorised kernel ``s_eta(t)`` with ``mu = lambda^beta``; broadcasts ``mu``, ``t``."""
    mu = np.asarray(mu, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    b = alpha + eta
    x = mu * t ** alpha
    return t ** (b - 1.0) * ml_neg(alpha, b, x, fast=fast)


def antiderivative(alpha, eta, mu, t, fast=True):
    """``t^{alpha+eta} E_{alpha,alpha+eta+1}(-mu t^alpha)``, zero at ``t = 0``."""
    mu = np.asarray(mu, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    b = alpha + eta
    mu, t = np.broadcast_arrays(mu, t)
    out = np.zeros(mu.shape)
    pos = t > 0
    out[pos] = t[pos] ** b * ml_neg(alpha, b + 1.0, mu[pos] * t[pos] ** alpha, fast=fast)
    return out


def apply_S(spec: ModelSpec, eta, t, u, fast=True):
    """``S_eta(t) u`` modewise; the last axis of ``u`` runs over modes."""
    return s_eta(spec.alpha, eta, spec.lam_beta, t, fast=fast) * np.asarray(u, dtype=float)


def conv_weight(alpha, beta, eta, lam, a, b, cfg: MLConfig = DEFAULT_CONFIG) -> float:
    """``int_a^b s_eta(tau) d tau`` as a difference of primitives."""
    if not (0 <= a < b):
        raise ValueError("need 0 <= a < b")
    mu = lam ** beta
    c = alpha + eta
    return (ml_antiderivative_scalar(alpha, c, mu, b, cfg)
            - ml_antiderivative_scalar(alpha, c, mu, a, cfg))


def interval_weights(alpha, eta, mu, a, b, n_gauss=20, fast=True):
    """``int_a^b s_eta`` for arrays of intervals ``[a, b]`` (broadcast with ``mu``).

    Intervals starting at zero use the primitive.  The others are assumed to
    lie at least their own length away from zero (true for grid intervals),
    where Gauss-Legendre avoids the cancellation a difference of nearly
    equal primitives suffers.
    """
    mu, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, a, b)))
    if np.any(b <= a) or np.any(a < 0):
        raise ValueError("need 0 <= a < b")
    out = np.empty(mu.shape)
    first = a == 0.0
    if first.any():
        out[first] = antiderivative(alpha, eta, mu[first], b[first], fast=fast)
    rest = ~first
    if rest.any():
        x, wg = np.polynomial.legendre.leggauss(n_gauss)
        a_, b_, mu_ = a[rest], b[rest], mu[rest]
        half = 0.5 * (b_ - a_)
        tau = (0.5 * (a_ + b_))[:, None] + half[:, None] * x[None, :]
        vals = s_eta(alpha, eta, mu_[:, None], tau, fast=fast)
        out[rest] = half * (vals @ wg)
    return out


def step_weights(alpha, eta, mu, h, M, n_gauss=20, fast=True):
    """Integrals of ``s_eta`` over ``[(i-1)h, ih]``, ``i = 1..M``; shape ``(M, K)``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    i = np.arange(M, dtype=float)[:, None]
    return interval_weights(alpha, eta, mu[None, :], i * h, (i + 1.0) * h, n_gauss, fast)


def operator_bound_exponent(alpha, beta, eta, rho) -> float:
    """Small-time exponent of ``sup_k lambda_k^{rho/2} s_{eta,k}(t)``."""
    return alpha + eta - 1.0 - alpha / (2.0 * beta) * max(rho, 0.0)


def operator_bound_slope(spec: ModelSpec, eta, rho, t_min=1e-4, t_max=1e-1, n_t=25):
    """Fitted log-log slope of ``t -> max_k lambda_k^{rho/2} s_{eta,k}(t)``.

    Returns ``(slope, r_squared)``.
    """
    if rho > 2 * spec.beta:
        raise ValueError("rho must not exceed 2 beta")
    if n_t < 4:
        raise DegenerateFitError("need at least 4 time points")
    lam = spec.basis.eigenvalues
    t = np.geomspace(t_min, t_max, n_t)
    vals = s_eta(spec.alpha, eta, spec.lam_beta[None, :], t[:, None])
    g = np.max(lam[None, :] ** (rho / 2.0) * np.abs(vals), axis=1)
    return loglog_fit(t, g, min_points=4)

