"""Mittag-Leffler Euler scheme and the deterministic skeleton solver.

Per mode ``k`` with ``mu_k = lambda_k^beta`` the scheme reads

    Y_m = E_{alpha,1}(-mu_k t_m^alpha) Y_0 + sum_{j<m} w_{m-j} F(Y_j) + Lambda(t_m),

where ``w_i`` integrates ``s_0`` over ``[t_{i-1}, t_i]``.  The skeleton run
replaces ``Lambda`` by ``Pi_h(v)``, the exact response to a piecewise-constant
control, built from the analogous ``s_gamma`` integrals.  Leading axes of the
noise (paths) are carried through; states are laid out ``(..., M+1, K)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mittag_leffler import ml_neg
from .model import ModelSpec, TimeGrid, apply_F
from .operators import interval_weights, step_weights

__all__ = [
    "NonFiniteStateError", "Trajectory", "Control", "SchemeWeights", "scheme_weights",
    "mle_run", "pi_operator", "skeleton_run", "rate_function_value",
]


class NonFiniteStateError(FloatingPointError):
    """A state became NaN or infinite; ``step`` is the offending grid index."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite state at step {step}")


@dataclass
class Trajectory:
    """States ``Y_0 .. Y_M`` on ``grid``; shape ``(..., M+1, K)``."""

    grid: TimeGrid
    states: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.states[..., -1, :]


@dataclass
class Control:
    """Piecewise-constant control: ``values[j]`` holds on ``[t_j, t_{j+1})``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.grid.M:
            raise ValueError("control values must have shape (M, K)")

    @classmethod
    def zero(cls, grid: TimeGrid, K):
        return cls(grid, np.zeros((grid.M, K)))

    @classmethod
    def sinusoid(cls, grid: TimeGrid, K, mode=1, amplitude=1.0, frequency=1.0):
        """``amplitude sin(2 pi frequency t / T)`` at interval midpoints, one mode."""
        mid = (np.arange(grid.M) + 0.5) * grid.h
        vals = np.zeros((grid.M, K))
        vals[:, mode - 1] = amplitude * np.sin(2.0 * math.pi * frequency * mid / grid.T)
        return cls(grid, vals)

    def refine(self, factor) -> "Control":
        """The same function on a grid ``factor`` times finer."""
        factor = int(factor)
        if factor < 1:
            raise ValueError("refinement factor must be a positive integer")
        fine = TimeGrid(self.grid.T, self.grid.M * factor)
        return Control(fine, np.repeat(self.values, factor, axis=0))

    def on(self, grid: TimeGrid) -> "Control":
        """Represent the control on ``grid``, which must refine this one."""
        if not math.isclose(grid.T, self.grid.T) or grid.M % self.grid.M:
            raise ValueError(f"grid with M = {grid.M} does not refine M = {self.grid.M}")
        return self.refine(grid.M // self.grid.M)


@dataclass(frozen=True)
class SchemeWeights:
    """Per-grid data of the scheme: ``w`` (M, K), ``decay`` (M+1, K) for ``Y_0``."""

    w: np.ndarray
    decay: np.ndarray


@lru_cache(maxsize=32)
def _cached_weights(alpha, mu_bytes, K, T, M):
    mu = np.frombuffer(mu_bytes, dtype=float, count=K)
    grid = TimeGrid(T, M)
    w = step_weights(alpha, 0.0, mu, grid.h, M)
    t = grid.times
    decay = ml_neg(alpha, 1.0, mu[None, :] * t[:, None] ** alpha)
    w.setflags(write=False)
    decay.setflags(write=False)
    return SchemeWeights(w, decay)


def scheme_weights(spec: ModelSpec, grid: TimeGrid) -> SchemeWeights:
    """Shift-invariant weights for ``grid``, cached per (spec, grid)."""
    mu = np.ascontiguousarray(spec.lam_beta, dtype=float)
    return _cached_weights(spec.alpha, mu.tobytes(), mu.size, grid.T, grid.M)


def _pairwise_weights(spec: ModelSpec, grid: TimeGrid, m):
    """Weights for step ``m`` computed interval by interval, ``j = 0..m-1``."""
    t = grid.times
    j = np.arange(m)
    a = (t[m] - t[j + 1])[:, None]
    b = (t[m] - t[j])[:, None]
    return interval_weights(spec.alpha, 0.0, spec.lam_beta[None, :], a, b)


def mle_run(spec: ModelSpec, grid: TimeGrid, noise, y0=None, pairwise=False) -> Trajectory:
    """Run the scheme on ``grid``.

    ``noise`` holds ``Lambda(t_1..t_M)`` with shape ``(..., K, M)``.  With
    ``pairwise`` every weight is recomputed from its own interval instead of
    the shift-invariant cache (for cross-checking only; quadratic cost).
    """
    noise = np.asarray(noise, dtype=float)
    K, M = spec.truncation, grid.M
    if noise.shape[-2:] != (K, M):
        raise ValueError(f"noise must have trailing shape ({K}, {M}), got {noise.shape}")
    lead = noise.shape[:-2]
    P = int(np.prod(lead)) if lead else 1
    lam = noise.reshape(P, K, M)
    y0 = spec.x0 if y0 is None else np.asarray(y0, dtype=float)
    sw = scheme_weights(spec, grid)
    Y = np.empty((P, M + 1, K))
    Y[:, 0, :] = y0
    linear_free = spec.nonlinearity.is_zero
    # history laid out (K, P, M) so each step is a batched matrix-vector product
    hist = np.zeros((K, P, M))
    wT = np.ascontiguousarray(sw.w.T)        # (K, M), wT[k, i-1] = w_i
    for m in range(1, M + 1):
        if linear_free:
            drift = 0.0
        else:
            hist[:, :, m - 1] = apply_F(Y[:, m - 1, :], spec).T
            if pairwise:
                wr = _pairwise_weights(spec, grid, m).T            # (K, m), index j
            else:
                wr = wT[:, m - 1::-1] if m > 1 else wT[:, :1]      # w_{m-j}, j = 0..m-1
            drift = np.matmul(hist[:, :, :m], wr[:, :, None])[:, :, 0].T
        Y[:, m, :] = sw.decay[m] * y0 + drift + lam[:, :, m - 1]
        if not np.all(np.isfinite(Y[:, m, :])):
            raise NonFiniteStateError(m)
    return Trajectory(grid, Y.reshape(lead + (M + 1, K)))


def pi_operator(spec: ModelSpec, grid: TimeGrid, g: Control) -> np.ndarray:
    """``Pi(g)(t_m)``, ``m = 0..M``, for a piecewise-constant ``g``; shape (M+1, K)."""
    if g.grid.M != grid.M:
        g = g.on(grid)
    M, K = grid.M, spec.truncation
    if g.values.shape[1] != K:
        raise ValueError("control has the wrong number of modes")
    wg = step_weights(spec.alpha, spec.gamma, spec.lam_beta, grid.h, M)
    out = np.zeros((M + 1, K))
    for k in range(K):
        out[1:, k] = np.convolve(wg[:, k], g.values[:, k])[:M]
    return out


def skeleton_run(spec: ModelSpec, grid: TimeGrid, v: Control, y0=None) -> Trajectory:
    """Skeleton trajectory: the scheme driven by ``Pi_h(v)`` in place of noise."""
    pi = pi_operator(spec, grid, v)
    return mle_run(spec, grid, pi[1:].T, y0=y0)


def rate_function_value(v: Control, q) -> float:
    """``(1/2) int_0^T |v(s)|_0^2 ds`` with ``|x|_0^2 = sum_k x_k^2 / q_k``."""
    q = np.asarray(q, dtype=float)
    vals = v.values
    if np.any((q[None, :] == 0.0) & (vals != 0.0)):
        return math.inf
    safe = np.where(q > 0, q, 1.0)
    return 0.5 * v.grid.h * float(np.sum(vals * vals / safe[None, :]))
