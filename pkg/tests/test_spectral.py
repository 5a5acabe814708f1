import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad, trapezoid

from conftest import unit
from slowfast_burgers.spectral import (ConfigurationError, build_basis, burgers_nonlinearity,
                                       h_alpha_norm, inner, l2_norm, semigroup_apply,
                                       trilinear_b)

XI = sp.symbols("xi")


def sym_e(k):
    return sp.sqrt(2) * sp.sin(k * sp.pi * XI)


def sym_b(i, j, k):
    """Exact int e_i e_j' e_k over [0, 1]."""
    return sp.integrate(sym_e(i) * sp.diff(sym_e(j), XI) * sym_e(k), (XI, 0, 1))


def fine_field(coeffs, xi):
    k = np.arange(1, len(coeffs) + 1)
    return math.sqrt(2) * np.sin(np.outer(xi, k * np.pi)) @ coeffs


def fine_deriv(coeffs, xi):
    k = np.arange(1, len(coeffs) + 1)
    return math.sqrt(2) * np.cos(np.outer(xi, k * np.pi)) @ (coeffs * k * np.pi)


def test_eigenvalues():
    b = build_basis(3, 16)
    assert np.allclose(b.eigenvalues, [math.pi**2, 4 * math.pi**2, 9 * math.pi**2], rtol=1e-14)


def test_gram_is_identity(basis32):
    assert np.abs(basis32.gram() - np.eye(32)).max() < 1e-12


def test_grid_too_small_rejected():
    with pytest.raises(ConfigurationError):
        build_basis(8, 16)


def test_round_trip(basis32, rng):
    x = rng.standard_normal(32)
    assert np.allclose(basis32.to_spectral(basis32.to_physical(x)), x, atol=1e-13)


def test_physical_values_match_direct_sum(basis32, rng):
    x = rng.standard_normal(32)
    assert np.allclose(basis32.to_physical(x), fine_field(x, basis32.grid), atol=1e-12)


def test_constant_projection_matches_quadrature():
    b = build_basis(6)
    want = [quad(lambda s, k=k: 2.0 * math.sqrt(2) * math.sin(k * math.pi * s), 0, 1)[0]
            for k in range(1, 7)]
    assert np.allclose(b.constant(2.0), want, atol=1e-12)


def test_semigroup_scalar():
    v = semigroup_apply(unit(1), 0.1, 1.0)[0]
    assert abs(v - math.exp(-0.1 * math.pi**2)) < 1e-14


def test_semigroup_zero_time_is_identity(rng):
    x = rng.standard_normal(8)
    assert np.array_equal(semigroup_apply(x, 0.0), x)


def test_semigroup_rejects_negative_time():
    with pytest.raises(ConfigurationError):
        semigroup_apply(unit(1), -1.0)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 8, elements=st.floats(-10, 10)), st.floats(0, 1), st.floats(0, 1))
def test_semigroup_property(x, s, t):
    a = semigroup_apply(semigroup_apply(x, s), t)
    b = semigroup_apply(x, s + t)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-300)
    assert l2_norm(b) <= l2_norm(x) + 1e-12


@pytest.mark.parametrize("i,j,k", [(1, 1, 2), (1, 2, 3), (2, 1, 3), (2, 3, 1), (3, 3, 6)])
def test_trilinear_matches_symbolic(i, j, k):
    b = build_basis(8)
    exact = float(sym_b(i, j, k))
    assert abs(float(trilinear_b(unit(i), unit(j), unit(k), b)) - exact) < 1e-12


def test_nonlinearity_e1():
    b = burgers_nonlinearity(unit(1), build_basis(8))
    assert np.allclose(b, unit(2, a=math.pi / math.sqrt(2)), atol=1e-12)


def test_nonlinearity_matches_trilinear(basis32, rng):
    # <B(x), z> = b(x, x, z)
    x = rng.standard_normal(32)
    z = rng.standard_normal(32)
    lhs = inner(burgers_nonlinearity(x, basis32), z)
    assert abs(lhs - trilinear_b(x, x, z, basis32)) < 1e-10


def test_nonlinearity_matches_fine_quadrature(rng):
    basis = build_basis(6)
    x = rng.standard_normal(6) / np.arange(1, 7)
    xi = np.linspace(0, 1, 20001)
    u, du = fine_field(x, xi), fine_deriv(x, xi)
    want = [trapezoid(u * du * math.sqrt(2) * np.sin(k * math.pi * xi), xi) for k in range(1, 7)]
    assert np.allclose(burgers_nonlinearity(x, basis), want, atol=1e-7)


def test_trilinear_yy_identity(basis32, rng):
    # b(x, y, y) = -1/2 int x' y^2, which is not zero for x != y
    for _ in range(10):
        x, y = rng.standard_normal(32), rng.standard_normal(32)
        xi = np.linspace(0, 1, 40001)
        oracle = -0.5 * trapezoid(fine_deriv(x, xi) * fine_field(y, xi) ** 2, xi)
        assert abs(trilinear_b(x, y, y, basis32) - oracle) < 1e-6 * max(1, abs(oracle))


def test_trilinear_xxx_vanishes(basis32, rng):
    x = rng.standard_normal((100, 32))
    vals = np.abs(trilinear_b(x, x, x, basis32))
    assert vals.max() <= 1e-10 * (l2_norm(x) ** 3).max()


@settings(max_examples=40, deadline=None)
@given(arrays(float, 16, elements=st.floats(-5, 5)))
def test_energy_neutrality_property(x):
    basis = build_basis(16)
    val = abs(float(inner(burgers_nonlinearity(x, basis), x)))
    assert val <= 1e-12 * max(1.0, float(l2_norm(x)) ** 3)


def test_h_alpha_norms():
    b = build_basis(4)
    assert float(h_alpha_norm(unit(1, 4), 0, b)) == pytest.approx(1, rel=1e-14)
    assert float(h_alpha_norm(unit(1, 4), 1, b)) == pytest.approx(math.pi, rel=1e-14)
    assert float(h_alpha_norm(unit(2, 4), 2, b)) == pytest.approx(4 * math.pi**2, rel=1e-14)
