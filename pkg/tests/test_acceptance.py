"""Acceptance criteria AC1-AC10 at their stated tolerances.

Each test appends a ``ACn PASS|FAIL ...`` line to the terminal summary.
Run on its own with ``pytest tests/test_acceptance.py -v``.
"""
import csv
import math
import os
import time

import numpy as np
import pytest

from fracspde.lab import gamma_convergence_study, holder_study, strong_error_study
from fracspde.mittag_leffler import ml
from fracspde.model import ModelSpec, Nonlinearity, TimeGrid
from fracspde.noise import assemble_cov, build_noise_model, kernel_cov, sample_paths
from fracspde.operators import operator_bound_exponent, operator_bound_slope
from fracspde.solver import Control

DATA = os.path.join(os.path.dirname(__file__), "data")

AC4_SPEC = ModelSpec(alpha=0.5, beta=1.0, gamma=0.5, domain_length=1.0, truncation=32,
                     horizon=1.0, nonlinearity=Nonlinearity.linear_diagonal(1.0), r_target=1.4)
AC4_GRIDS = [8, 16, 32, 64, 128]
AC4_REF = 1024
AC4_PATHS = 200
AC4_SEED = 2024
AC6_LAGS = [1, 2, 4, 8, 16, 32, 64]      # delta from h_ref up to T/16


def _log(log, n, ok, detail):
    log.append(f"AC{n} {'PASS' if ok else 'FAIL'} {detail}")
    return ok


@pytest.fixture(scope="module")
def ac4_tables():
    """AC4 table for 4 workers plus the CSVs for 1, 2 and 8 (reused by AC10)."""
    out = {}
    for w in (4, 1, 2, 8):
        t0 = time.perf_counter()
        table = strong_error_study(AC4_SPEC, AC4_GRIDS, AC4_REF, AC4_PATHS, AC4_SEED, workers=w)
        out[w] = (table, time.perf_counter() - t0)
    return out


def _ac1_worst():
    with open(os.path.join(DATA, "ml_oracle.csv")) as fh:
        rows = list(csv.DictReader(fh))
    worst = 0.0
    for r in rows:
        a, b, z, ref = (float(r[k]) for k in ("a", "b", "z", "value"))
        worst = max(worst, abs(ml(a, b, z) - ref) / abs(ref))
    exp_worst = max(abs(ml(1.0, 1.0, z) - math.exp(z)) / math.exp(z)
                    for z in np.linspace(-50.0, 0.0, 1001))
    return worst, exp_worst, len(rows)


def test_ac1_mittag_leffler_accuracy(acceptance_log):
    t0 = time.perf_counter()
    worst, exp_worst, n = _ac1_worst()
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and exp_worst <= 1e-12 and dt < 10
    _log(acceptance_log, 1, ok, f"max rel err {worst:.2e} over {n} triples (tol 1e-9); "
         f"exp case {exp_worst:.2e} (tol 1e-12); {dt:.1f}s")
    assert ok


def test_ac2_derivative_identity(acceptance_log):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        a = rng.uniform(0.05, 1.0)
        eta = rng.uniform(0.0, 1.0) if rng.uniform() < 0.8 else 1.0 - a
        lam = 10 ** rng.uniform(-2, 3)
        t = 10 ** rng.uniform(-2, 0.3)
        dt = 1e-5 * t
        f = lambda s: s ** (a + eta - 1) * ml(a, a + eta, -lam * s ** a)
        fd = (f(t + dt) - f(t - dt)) / (2 * dt)
        if abs(a + eta - 1.0) < 1e-14:
            exact = -lam * t ** (a - 1) * ml(a, a, -lam * t ** a)
        else:
            exact = t ** (a + eta - 2) * ml(a, a + eta - 1, -lam * t ** a)
        worst = max(worst, abs(fd - exact) / abs(exact))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 5
    _log(acceptance_log, 2, ok, f"max rel err {worst:.2e} over 100 tuples (tol 1e-6); {dt:.1f}s")
    assert ok


def test_ac3_operator_bound_slopes(acceptance_log):
    # L = 50 puts lambda_1^beta t^alpha << 1 on the whole fitting window
    spec = ModelSpec(alpha=0.5, beta=1.0, gamma=0.5, domain_length=50.0, truncation=512)
    t0 = time.perf_counter()
    parts, ok = [], True
    for eta, rho in [(0.0, 0.0), (1 - spec.alpha, 0.0), (0.0, spec.beta), (spec.gamma, 0.0)]:
        slope, _ = operator_bound_slope(spec, eta, rho)
        target = operator_bound_exponent(spec.alpha, spec.beta, eta, rho)
        ok &= abs(slope - target) <= 0.05
        parts.append(f"({eta:g},{rho:g}): {slope:.3f} vs {target:.3f}")
    dt = time.perf_counter() - t0
    ok &= dt < 30
    _log(acceptance_log, 3, ok, "; ".join(parts) + f" (tol 0.05); {dt:.1f}s")
    assert ok


def test_ac4_linear_superconvergence(acceptance_log, ac4_tables):
    table, dt = ac4_tables[4]
    ok = 0.75 <= table.fitted <= 0.95 and dt <= 600
    _log(acceptance_log, 4, ok, f"fitted order {table.fitted:.3f} (R^2 {table.r_squared:.3f}), "
         f"band [0.75, 0.95], predicted {table.predicted:.3f}; {dt:.1f}s")
    assert ok


def test_ac5_nonlinear_order(acceptance_log):
    spec = ModelSpec(alpha=0.5, beta=1.0, gamma=0.5, domain_length=1.0, truncation=32,
                     nonlinearity=Nonlinearity.nemytskii("sin_scaled", 1.0), r_target=1.4)
    t0 = time.perf_counter()
    table = strong_error_study(spec, AC4_GRIDS, AC4_REF, AC4_PATHS, AC4_SEED, workers=4)
    dt = time.perf_counter() - t0
    ok = table.fitted >= 0.6 and dt <= 900
    _log(acceptance_log, 5, ok, f"fitted order {table.fitted:.3f} (R^2 {table.r_squared:.3f}), "
         f"need >= 0.6, predicted {table.predicted:.3f}; {dt:.1f}s")
    assert ok


def test_ac6_holder_exponent(acceptance_log):
    t0 = time.perf_counter()
    table = holder_study(AC4_SPEC, AC4_REF, AC4_PATHS, AC6_LAGS, AC4_SEED, workers=4)
    dt = time.perf_counter() - t0
    ok = abs(table.fitted - 0.70) <= 0.15 and dt <= 600
    _log(acceptance_log, 6, ok, f"increment slope {table.fitted:.3f} (R^2 {table.r_squared:.3f}), "
         f"target 0.70 +- 0.15; {dt:.1f}s")
    assert ok


def test_ac7_noise_sampler(acceptance_log):
    t0 = time.perf_counter()
    grid = TimeGrid(1.0, 16)
    t = grid.times[1:]
    entry_err = 0.0
    for k in (1, 8, 32):
        mu = AC4_SPEC.lam_beta[k - 1]
        C = assemble_cov(0.5, 0.5, mu, 1.0, grid)[0]
        ref = np.array([[kernel_cov(0.5, 0.5, mu, 1.0, a, b) for b in t] for a in t])
        entry_err = max(entry_err, float(np.max(np.abs(C - ref) / np.max(np.abs(ref)))))

    lam = 3.0
    C = assemble_cov(1.0, 0.0, lam, 1.0, grid)[0]
    lo, hi = np.minimum.outer(t, t), np.maximum.outer(t, t)
    ou = (np.exp(-lam * (hi - lo)) - np.exp(-lam * (hi + lo))) / (2 * lam)
    ou_err = float(np.max(np.abs(C - ou)))

    spec = ModelSpec(alpha=0.5, beta=1.0, gamma=0.5, truncation=1)
    g8 = TimeGrid(1.0, 8)
    model = build_noise_model(spec, g8, keep_cov=True)
    n = 100_000
    x = sample_paths(model, n, seed=AC4_SEED).samples[:, 0, :]
    C8 = model.modes[0].cov
    d = np.diag(C8)
    z = float(np.max(np.abs(x.T @ x / n - C8) / np.sqrt((np.outer(d, d) + C8 ** 2) / n)))
    dt = time.perf_counter() - t0
    ok = entry_err <= 1e-7 and ou_err <= 1e-8 and z <= 5 and dt < 120
    _log(acceptance_log, 7, ok, f"M=16 entrywise {entry_err:.1e} (tol 1e-7); OU {ou_err:.1e} "
         f"(tol 1e-8); 1e5-path empirical max {z:.2f} SE (tol 5); {dt:.1f}s")
    assert ok


def test_ac8_skeleton_convergence(acceptance_log):
    spec = ModelSpec(alpha=0.5, beta=1.0, gamma=0.5, domain_length=1.0, truncation=32,
                     nonlinearity=Nonlinearity.linear_diagonal(0.5), r_target=1.4)
    t0 = time.perf_counter()
    control = Control.sinusoid(TimeGrid(1.0, 8), 32, mode=1)
    table = gamma_convergence_study(spec, control, [8, 16, 32, 64, 128, 256], 2048)
    dt = time.perf_counter() - t0
    rates = table.per_row["rate_function"]
    spread = max(rates) - min(rates)
    ok = table.fitted >= 0.25 and spread <= 1e-14 and dt < 120
    _log(acceptance_log, 8, ok, f"sup-norm rate {table.fitted:.3f} (need >= 0.25); "
         f"rate function spread {spread:.1e} (tol 1e-14); {dt:.1f}s")
    assert ok


def test_ac9_zero_drift_exactness(acceptance_log):
    spec = ModelSpec(alpha=0.5, beta=1.0, gamma=0.5, domain_length=1.0, truncation=32,
                     nonlinearity=Nonlinearity.zero(), r_target=1.4)
    t0 = time.perf_counter()
    table = strong_error_study(spec, AC4_GRIDS, AC4_REF, AC4_PATHS, AC4_SEED, workers=4)
    dt = time.perf_counter() - t0
    worst = max(r.value for r in table.rows)
    ok = worst == 0.0 and dt < 60
    _log(acceptance_log, 9, ok, f"max rms error {worst:.1e} over M = {AC4_GRIDS}; {dt:.1f}s")
    assert ok


def test_ac10_reproducible_csv(acceptance_log, ac4_tables):
    texts = {w: ac4_tables[w][0].csv_text(header=["seed = 2024"]) for w in (1, 2, 8, 4)}
    ok = len(set(texts.values())) == 1
    _log(acceptance_log, 10, ok, "AC4 CSV byte-identical for workers 1, 2, 8 (and 4)"
         if ok else "AC4 CSV differs between worker counts")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
