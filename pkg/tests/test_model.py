import math
import re
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fracspde.model import (AliasingWarning, InitialDatum, ModelSpec, ModelValidationError,
                            Nonlinearity, QSpectrum, TimeGrid, apply_A_power, apply_F,
                            build_basis, default_r_target, frac_norm, kappa, predicted_holder_exponent,
                            predicted_order_linear, predicted_order_nonlinear, project, synthesize,
                            validate)

coeffs = arrays(np.float64, st.integers(1, 24), elements=st.floats(-10, 10))


def test_basis_eigenvalues():
    assert np.allclose(build_basis(math.pi, 3).eigenvalues, [1.0, 4.0, 9.0], rtol=1e-15)
    assert build_basis(1.0, 1).eigenvalues[0] == pytest.approx(9.8696044, rel=1e-8)
    assert np.allclose(build_basis(2.0, 2).eigenvalues, [math.pi ** 2 / 4, math.pi ** 2])


@pytest.mark.parametrize("L,K", [(0.0, 3), (-1.0, 3), (1.0, 0), (1.0, 2.5)])
def test_basis_rejects_bad_input(L, K):
    with pytest.raises(ValueError):
        build_basis(L, K)


def test_frac_norm_trivial():
    basis = build_basis(1.0, 5)
    assert frac_norm([3.0, 4.0, 0, 0, 0], basis, 0) == pytest.approx(5.0)
    assert frac_norm([1.0, 0, 0, 0, 0], basis, 2) == pytest.approx(basis.eigenvalues[0])


def test_frac_norm_against_extended_precision():
    rng = np.random.default_rng(11)
    basis = build_basis(1.3, 40)
    u = rng.standard_normal(40)
    with mp.workdps(40):
        L = mp.mpf(1.3)
        ref = mp.sqrt(mp.fsum((k * mp.pi / L) ** 2 * mp.mpf(u[k - 1]) ** 2
                              for k in range(1, 41)))
    assert frac_norm(u, basis, 1) == pytest.approx(float(ref), rel=1e-12)


def test_apply_A_power_identities():
    basis = build_basis(2.0, 6)
    u = np.arange(1.0, 7.0)
    assert np.array_equal(apply_A_power(u, basis, 0), u)
    e3 = np.eye(6)[2]
    assert np.allclose(apply_A_power(e3, basis, 1), basis.eigenvalues[2] * e3)
    back = apply_A_power(apply_A_power(u, basis, 0.7), basis, -0.7)
    assert np.max(np.abs(back - u)) <= 1e-14 * np.max(np.abs(u))


@settings(max_examples=50, deadline=None)
@given(u=coeffs, L=st.floats(0.2, 10.0))
def test_transform_round_trip(u, L):
    K = u.size
    back = project(synthesize(u, 4 * K, L), K, L)
    assert np.max(np.abs(back - u), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(u)))


@settings(max_examples=50, deadline=None)
@given(u=coeffs, L=st.floats(0.2, 10.0))
def test_discrete_parseval(u, L):
    n_x = 4 * u.size
    vals = synthesize(u, n_x, L)
    quad = math.sqrt(L / n_x * float(np.sum(vals ** 2)))
    assert quad == pytest.approx(frac_norm(u, build_basis(L, u.size), 0), rel=1e-10, abs=1e-12)


def test_first_mode_at_midpoint():
    L = 3.0
    vals = synthesize([1.0, 0.0], 8, L)
    assert vals[3] == pytest.approx(math.sqrt(2 / L), rel=1e-14)   # node 4 of 8 is x = L/2


def test_transform_leading_axes_and_aliasing():
    u = np.ones((2, 3, 5))
    assert synthesize(u, 20, 1.0).shape == (2, 3, 19)
    with pytest.warns(AliasingWarning):
        synthesize(u, 8, 1.0)
    with pytest.raises(ValueError):
        synthesize(u, 5, 1.0)


def test_apply_F_zero_and_linear():
    u = np.array([0.3, -1.2, 2.0])
    spec0 = ModelSpec(truncation=3)
    assert np.array_equal(apply_F(u, spec0), np.zeros(3))
    spec2 = ModelSpec(truncation=3, nonlinearity=Nonlinearity.linear_diagonal(2.0))
    assert np.array_equal(apply_F(u, spec2), 2 * u)


def test_constant_function_projection():
    # discrete sine coefficients of 1: (L/n) sqrt(2/L) cot(k pi / 2n) for odd k, 0 for even k
    L, K, n = 2.0, 8, 32
    spec = ModelSpec(domain_length=L, truncation=K,
                     nonlinearity=Nonlinearity.nemytskii("affine", 0.0, 1.0, n_x=n))
    got = apply_F(np.zeros(K), spec)
    k = np.arange(1, K + 1)
    ref = np.where(k % 2 == 1, L / n * math.sqrt(2 / L) / np.tan(k * math.pi / (2 * n)), 0.0)
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-14)
    exact = math.sqrt(2 / L) * L * (1 - np.cos(k * math.pi)) / (k * math.pi)
    assert np.allclose(got, exact, rtol=(K * math.pi / (2 * n)) ** 2, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(f_id=st.sampled_from(["sin_scaled", "tanh_scaled", "affine"]), c=st.floats(-3, 3),
       seed=st.integers(0, 2 ** 32 - 1))
def test_nemytskii_lipschitz(f_id, c, seed):
    rng = np.random.default_rng(seed)
    spec = ModelSpec(truncation=12, nonlinearity=Nonlinearity.nemytskii(f_id, c, 0.4))
    u, v = rng.standard_normal((2, 12)) * 3
    lhs = np.linalg.norm(apply_F(u, spec) - apply_F(v, spec))
    assert lhs <= spec.nonlinearity.lipschitz * np.linalg.norm(u - v) * (1 + 1e-12) + 1e-14


def test_nonlinearity_flags():
    assert Nonlinearity.zero().is_zero
    assert Nonlinearity.linear_diagonal(1.0).is_linear
    assert not Nonlinearity.nemytskii("sin_scaled", 1.0).is_linear
    assert Nonlinearity.nemytskii("affine", 2.0).is_linear
    with pytest.raises(ValueError):
        Nonlinearity.nemytskii("cube")


def test_initial_datum():
    x0 = InitialDatum().coefficients(4, 1.0)
    assert np.allclose(x0, np.arange(1, 5) ** -2.6)
    assert np.array_equal(InitialDatum("mode", k0=2, amplitude=3).coefficients(3, 1.0), [0, 3, 0])
    assert not InitialDatum("zero").coefficients(3, 1.0).any()


def test_time_grid():
    g = TimeGrid(2.0, 8)
    assert g.h == 0.25
    assert g.times[-1] == 2.0
    assert g.coarsen(4).M == 2
    with pytest.raises(ValueError):
        g.coarsen(3)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)


def test_kappa_values():
    assert kappa(0.5, 1.0, 0.5) == pytest.approx(1.999)
    assert kappa(0.9, 1.0, 0.0) == pytest.approx(0.4 * 2 / 0.9 - 1e-3)


def test_validate_report_at_reference_point():
    rep = validate(ModelSpec(alpha=0.5, beta=1.0, gamma=0.5, r_target=1.4))
    assert rep.kappa == pytest.approx(1.999)
    assert rep.r_max == pytest.approx(1.499)
    assert rep.r_max_strict
    assert rep.predicted_linear == pytest.approx(0.85)
    assert rep.predicted_holder == pytest.approx(0.35)
    assert any("kappa" in line for line in rep.lines())


def test_validate_accepts_alpha_09_gamma_0():
    rep = validate(ModelSpec(alpha=0.9, beta=1.0, gamma=0.0, r_target=0.3))
    assert rep.kappa == pytest.approx(0.8889 - 1e-3, abs=1e-4)


@pytest.mark.parametrize("kw,msg", [
    (dict(alpha=1.2), "alpha must lie in (0,1)"),
    (dict(alpha=0.3, gamma=0.1), "alpha + gamma must exceed 1/2"),
    (dict(alpha=0.4, gamma=0.0), "alpha + gamma must exceed 1/2"),
    (dict(beta=0.0), "beta"),
    (dict(r_target=1.6), "trace condition"),
    (dict(initial=InitialDatum(p=2.4)), "x0_p"),
])
def test_validate_rejections(kw, msg):
    with pytest.raises(ModelValidationError, match=re.escape(msg)):
        validate(ModelSpec(**kw))


def test_default_r_target():
    assert default_r_target(0.5, 1.0, 0.5, QSpectrum()) == pytest.approx(1.399)
    # a decaying spectrum relaxes the trace bound so kappa itself binds
    assert default_r_target(0.5, 1.0, 0.5, QSpectrum("power_law", 1.0)) == pytest.approx(1.999)


@pytest.mark.parametrize("a,b,g,r,expected", [
    (0.5, 1.0, 0.5, 1.4, 0.85),
    (0.9, 1.0, 0.9, 2.0, 1.0),
    (0.6, 1.0, 0.0, 1.0, 0.6),
])
def test_predicted_order_linear(a, b, g, r, expected):
    spec = ModelSpec(alpha=a, beta=b, gamma=g, r_target=r)
    assert predicted_order_linear(spec) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("a,b,g,r,expected", [
    (0.5, 1.0, 0.5, 1.4, 0.7),
    (0.4, 1.0, 0.8, 1.0, 0.7),
    (0.9, 1.0, 0.9, 1.9, 1.0),
])
def test_predicted_order_nonlinear(a, b, g, r, expected):
    spec = ModelSpec(alpha=a, beta=b, gamma=g, r_target=r)
    assert predicted_order_nonlinear(spec) == pytest.approx(expected, abs=1e-3)


@pytest.mark.parametrize("a,b,g,r,expected", [
    (0.5, 1.0, 0.5, 1.4, 0.35),
    (0.3, 1.0, 0.9, 0.5, 0.3),
    (0.6, 1.0, 0.7, 2.0, 0.6),
])
def test_predicted_holder_exponent(a, b, g, r, expected):
    spec = ModelSpec(alpha=a, beta=b, gamma=g, r_target=r)
    assert predicted_holder_exponent(spec) == pytest.approx(expected, abs=1e-12)


def test_spec_does_not_validate_on_construction():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spec = ModelSpec(alpha=1.0, gamma=0.0)
    assert spec.alpha == 1.0
