"""Exact-in-law sampling of the stochastic convolution on a uniform grid.

Per mode the process ``Lambda_k(t) = sqrt(q_k) int_0^t s_gamma(t - u) dW_k(u)``
is Gaussian with covariance

    C(m, n) = q_k int_0^{t_p} s_gamma(tau + t_d) s_gamma(tau) d tau,
    p = min(m, n),  d = |m - n|.

The integral over ``[0, t_p]`` splits into step panels.  Panels away from the
origin use Gauss-Legendre; the first panel, where ``s_gamma`` is singular,
uses product integration on a geometrically graded mesh.  Samples are drawn
as ``L xi`` with ``L`` the Cholesky factor and ``xi`` taken from a Philox
stream keyed by ``(seed, path, mode)``, so every path is reproducible on its
own regardless of batching or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .mittag_leffler import get_table
from .model import ModelSpec, TimeGrid
from .operators import antiderivative, s_eta

__all__ = [
    "CovarianceFactorizationError", "ModeCovariance", "NoiseModel", "NoiseEnsemble",
    "kernel_cov", "cov_entry", "assemble_cov", "assemble_mode_cov", "build_noise_model",
    "mode_normals", "sample_paths", "restrict", "PATH_BLOCK",
]

#: Paths are always sampled in blocks of this many columns so that the
#: floating-point work per path does not depend on how paths are batched.
PATH_BLOCK = 16

_N_GAUSS = 16
_GRADING = 1.0 / 3.0
_JITTER_STEPS = (0.0, 1e-12, 1e-10, 1e-8)
_ZERO_MODE = 1e-30


class CovarianceFactorizationError(np.linalg.LinAlgError):
    """Cholesky failed even after the largest jitter."""


# ---------------------------------------------------------------------------
# reference entry by adaptive quadrature

def kernel_cov(alpha, gamma, mu, q, t_m, t_n, epsrel=1e-11):
    """``q int_0^{min} s_gamma(t_m - u) s_gamma(t_n - u) du`` by adaptive quadrature.

    With ``tau = u^{1/alpha}`` the kernel becomes ``u^{(alpha+gamma-1)/alpha}``
    times the entire function ``E(-mu u)``, so one algebraically weighted
    quadrature over ``u`` handles the endpoint singularity.
    """
    lo, hi = sorted((float(t_m), float(t_n)))
    if lo < 0:
        raise ValueError("times must be nonnegative")
    if lo == 0.0 or q == 0.0:
        return 0.0
    d = hi - lo
    b = alpha + gamma
    tab = get_table(alpha, b)

    if d == 0.0:
        def g(u):
            e = tab(np.array([mu * u]))[0]
            return e * e / alpha
        expo = (2.0 * (b - 1.0) + 1.0) / alpha - 1.0
    else:
        def g(u):
            tau = u ** (1.0 / alpha)
            e = tab(np.array([mu * u, mu * (tau + d) ** alpha]))
            return e[0] * e[1] * (tau + d) ** (b - 1.0) / alpha
        expo = b / alpha - 1.0
    val, _ = integrate.quad(g, 0.0, lo ** alpha, weight="alg", wvar=(expo, 0.0),
                            epsabs=0.0, epsrel=epsrel, limit=500)
    return q * val


def cov_entry(spec: ModelSpec, k, t_m, t_n, epsrel=1e-12):
    """Covariance of ``Lambda_k`` at two times (``k`` is 1-based)."""
    if not 1 <= k <= spec.truncation:
        raise IndexError(f"mode {k} outside 1..{spec.truncation}")
    mu = float(spec.lam_beta[k - 1])
    q = float(spec.q[k - 1])
    return kernel_cov(spec.alpha, spec.gamma, mu, q, t_m, t_n, epsrel)


# ---------------------------------------------------------------------------
# panel assembly

def _lagrange_at(nodes, y):
    """Lagrange basis polynomials on ``nodes`` evaluated at points ``y``: (len(y), n)."""
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    dy = np.asarray(y, dtype=float)[:, None] - nodes[None, :]
    exact = dy == 0.0
    dy[exact] = 1.0
    terms = bw / dy
    out = terms / terms.sum(axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    out[rows] = exact[rows].astype(float)
    return out


def _graded_mesh(h, b):
    """Geometric subpanels of ``[delta, h]`` and the innermost width ``delta``.

    ``delta`` is small enough that the leading-order approximation on
    ``[0, delta]`` is far below double precision relative to the panel.
    """
    J = int(math.ceil(36.0 / (b * -math.log10(_GRADING))))
    edges = h * _GRADING ** np.arange(J + 1)
    return edges[::-1], edges[-1]


def _first_panel(alpha, gamma, mu, h, nodes01):
    """Product-integration weights and the diagonal integral on ``[0, h]``.

    Returns ``W`` with shape ``(K, n)`` such that
    ``int_0^h s(tau) g(tau) d tau ~ sum_i W_i g(h x_i)`` for smooth ``g``,
    and ``int_0^h s(tau)^2 d tau`` with shape ``(K,)``.
    """
    b = alpha + gamma
    edges, delta = _graded_mesh(h, b)
    x, wg = np.polynomial.legendre.leggauss(_N_GAUSS)
    a_, b_ = edges[:-1], edges[1:]
    tau = (0.5 * (a_ + b_))[:, None] + (0.5 * (b_ - a_))[:, None] * x[None, :]
    wq = (0.5 * (b_ - a_))[:, None] * wg[None, :]
    tau, wq = tau.ravel(), wq.ravel()
    s = s_eta(alpha, gamma, mu[:, None], tau[None, :])
    ell = _lagrange_at(nodes01, tau / h)
    W = (s * wq[None, :]) @ ell
    # innermost piece: basis functions are constant to O(delta / h) there
    W += antiderivative(alpha, gamma, mu, delta)[:, None] * _lagrange_at(nodes01, [0.0])
    diag = (s * s) @ wq
    two_b = 2.0 * b - 1.0
    diag += delta ** two_b / (two_b * math.gamma(b) ** 2)
    return W, diag


def assemble_cov(alpha, gamma, mu, q, grid: TimeGrid):
    """Covariance matrices for every ``mu``; returns an array ``(K, M, M)``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    q = np.broadcast_to(np.asarray(q, dtype=float), mu.shape)
    if alpha + gamma <= 0.5:
        raise ValueError("alpha + gamma must exceed 1/2 for a finite covariance")
    M, h = grid.M, grid.h
    x, wg = np.polynomial.legendre.leggauss(_N_GAUSS)
    nodes01 = 0.5 * (1.0 + x)
    w01 = 0.5 * wg
    # S[k, j, i] = s(t_j + h x_i), j = 0..M-1
    tau = (np.arange(M) * h)[:, None] + h * nodes01[None, :]
    S = s_eta(alpha, gamma, mu[:, None, None], tau[None, :, :])
    W, diag0 = _first_panel(alpha, gamma, mu, h, nodes01)
    out = np.empty((mu.size, M, M))
    rows = np.arange(M)
    for k in range(mu.size):
        A = h * (S[k] * w01[None, :]) @ S[k].T   # A[a, c] = panel integral, a >= c
        A[:, 0] = S[k] @ W[k]                      # first panel, d = a
        A[0, 0] = diag0[k]
        C = np.zeros((M, M))
        for d in range(M):
            C[rows[d:], rows[:M - d]] = np.cumsum(A[rows[d:], rows[:M - d]])
        C = np.tril(C) + np.tril(C, -1).T
        out[k] = q[k] * C
    return out


@dataclass
class ModeCovariance:
    """Covariance of one mode on the grid and its lower Cholesky factor.

    ``cov`` may be ``None`` when only the factor was kept.
    """

    k: int
    cov: np.ndarray | None
    factor: np.ndarray
    jitter: float
    zeroed: bool = False


def _factorize(k, C, keep_cov=True) -> ModeCovariance:
    dmax = float(np.max(np.diag(C))) if C.size else 0.0
    kept = C if keep_cov else None
    if dmax < _ZERO_MODE:
        return ModeCovariance(k, kept, np.zeros_like(C), 0.0, zeroed=True)
    eye = np.eye(C.shape[0])
    for rel in _JITTER_STEPS:
        try:
            Lf = np.linalg.cholesky(C + rel * dmax * eye)
        except np.linalg.LinAlgError:
            continue
        return ModeCovariance(k, kept, Lf, rel * dmax)
    raise CovarianceFactorizationError(
        f"mode {k}: covariance not positive definite with jitter {_JITTER_STEPS[-1]:g} x max diag")


def assemble_mode_cov(spec: ModelSpec, grid: TimeGrid, k) -> ModeCovariance:
    """Assembled and factorized covariance of mode ``k`` (1-based)."""
    C = assemble_cov(spec.alpha, spec.gamma, spec.lam_beta[k - 1], spec.q[k - 1], grid)[0]
    return _factorize(k, C)


@dataclass
class NoiseModel:
    """Factorized covariances of all modes on one grid."""

    spec: ModelSpec
    grid: TimeGrid
    modes: list


def build_noise_model(spec: ModelSpec, grid: TimeGrid, workers=1, keep_cov=False,
                      chunk_bytes=2 ** 27) -> NoiseModel:
    """Assemble and factorize every mode.

    Modes are processed in chunks whose dense matrices fit in ``chunk_bytes``;
    only the factors are retained unless ``keep_cov``.
    """
    mu, q = spec.lam_beta, spec.q
    K = spec.truncation
    chunk = max(1, int(chunk_bytes // (8 * grid.M * grid.M)))
    starts = list(range(0, K, chunk))

    def job(s):
        e = min(s + chunk, K)
        covs = assemble_cov(spec.alpha, spec.gamma, mu[s:e], q[s:e], grid)
        return [_factorize(s + i + 1, c, keep_cov) for i, c in enumerate(covs)]

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, starts))
    else:
        parts = [job(s) for s in starts]
    return NoiseModel(spec, grid, [m for part in parts for m in part])


# ---------------------------------------------------------------------------
# sampling

@dataclass
class NoiseEnsemble:
    """Samples ``Lambda_k(t_m)``, ``m = 1..M``, indexed ``(path, mode, m-1)``."""

    samples: np.ndarray
    grid: TimeGrid
    seed: int
    paths: np.ndarray

    @property
    def n_paths(self):
        return self.samples.shape[0]

    def with_origin(self) -> np.ndarray:
        """Samples with the zero value at ``t_0`` prepended: ``(path, mode, M+1)``."""
        z = np.zeros(self.samples.shape[:2] + (1,))
        return np.concatenate([z, self.samples], axis=2)


def mode_normals(seed, path, mode, n) -> np.ndarray:
    """Standard normals for one ``(path, mode)`` pair from its own Philox stream."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path), int(mode)))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(n)


def _sample_block(model, seed, paths, M):
    K = len(model.modes)
    lam = np.empty((len(paths), K, M))
    xi = np.zeros((M, PATH_BLOCK))
    for k, mode in enumerate(model.modes):
        for j, p in enumerate(paths):
            xi[:, j] = mode_normals(seed, p, k + 1, M)
        lam[:, k, :] = (mode.factor @ xi)[:, :len(paths)].T
    return lam


def sample_paths(model: NoiseModel, n_paths, seed, first_path=0, workers=1) -> NoiseEnsemble:
    """Draw ``n_paths`` paths with indices ``first_path, first_path + 1, ...``."""
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    M = model.grid.M
    paths = np.arange(first_path, first_path + n_paths)
    blocks = [paths[i:i + PATH_BLOCK] for i in range(0, n_paths, PATH_BLOCK)]

    def job(bp):
        return _sample_block(model, seed, bp, M)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, blocks))
    else:
        parts = [job(bp) for bp in blocks]
    return NoiseEnsemble(np.concatenate(parts, axis=0), model.grid, int(seed), paths)


def restrict(ensemble: NoiseEnsemble, c) -> NoiseEnsemble:
    """Keep the samples at ``t_{c j}``; the result lives on the coarsened grid."""
    coarse = ensemble.grid.coarsen(c)
    c = int(c)
    return NoiseEnsemble(ensemble.samples[:, :, c - 1::c], coarse, ensemble.seed, ensemble.paths)
