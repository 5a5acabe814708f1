from dataclasses import replace

import numpy as np
import pytest

from slowfast_burgers.averaging import (analytic_averaged_drift, default_burn_in,
                                        estimate_averaged_drift, validate_assumptions)
from slowfast_burgers.integrators import SystemCoefficients
from slowfast_burgers.noise import NoiseModel
from slowfast_burgers.registry import get_example
from slowfast_burgers.spectral import ConfigurationError, build_basis


@pytest.mark.parametrize("name", ["burgers_ou_levy", "burgers_ou_levy_coupled"])
def test_ergodic_estimate_agrees_with_analytic(name):
    ex = get_example(name, n_modes=8)
    est = estimate_averaged_drift(ex.x0, ex.coeffs, ex.noise, 5.0, 80.0, 0.01,
                                  np.random.default_rng(21), basis=ex.basis)
    want = ex.fbar(ex.x0)
    err = np.linalg.norm(est.drift_value - want)
    assert err < 4 * est.l2_standard_error + 1e-12
    assert est.l2_standard_error < 0.1 * np.linalg.norm(want)


def test_ergodic_estimate_deterministic_limit():
    # without fast noise the frozen path relaxes to 0, so the average is f1(x, 0)
    ex = get_example("burgers_ou_levy", n_modes=4)
    noise = replace(ex.noise, fast=NoiseModel(np.zeros(4), levy_rate=0.0))
    est = estimate_averaged_drift(ex.x0, ex.coeffs, noise, 30.0, 40.0, 0.01,
                                  np.random.default_rng(0), y0=np.ones(4))
    assert np.allclose(est.drift_value, -ex.x0, atol=1e-10)


def test_burn_in_default_and_validation():
    ex = get_example("burgers_ou_levy", n_modes=4)
    assert default_burn_in(ex.coeffs, ex.basis) == pytest.approx(10 / (2 * np.pi**2 - 1))
    with pytest.raises(ConfigurationError):
        estimate_averaged_drift(ex.x0, ex.coeffs, ex.noise, 5.0, 5.0, 0.01,
                                np.random.default_rng(0))


def test_analytic_drift_lookup():
    assert np.allclose(analytic_averaged_drift("burgers_ou_levy")(np.array([2.0, 1.0])),
                       [-2.0, -1.0])
    with pytest.raises(KeyError):
        analytic_averaged_drift("nope")


def test_example_satisfies_assumptions():
    ex = get_example("burgers_ou_levy")
    rep = validate_assumptions(ex.coeffs, ex.noise, ex.basis)
    assert rep.passed, rep.to_text()
    assert "18.739" in rep["A3"].detail
    assert rep.to_csv().splitlines()[0].startswith("clause")


def test_a1_violation_detected():
    ex = get_example("burgers_ou_levy", n_modes=8)
    coeffs = replace(ex.coeffs, f1=lambda x, y: -3.0 * (x + y))
    rep = validate_assumptions(coeffs, ex.noise, ex.basis)
    assert not rep["A1"].passed


def test_a2_violation_detected():
    ex = get_example("burgers_ou_levy", n_modes=8)
    coeffs = replace(ex.coeffs, L_h1=0.1)
    assert not validate_assumptions(coeffs, ex.noise, ex.basis)["A2"].passed


def test_a3_violation_detected():
    basis = build_basis(4)
    coeffs = SystemCoefficients(f1=lambda x, y: -y, f2=lambda x, y: 30.0 * y, L_f2=30.0)
    rep = validate_assumptions(coeffs, NoiseModel.power_law(4), basis)
    assert not rep["A3"].passed
    assert "A3" in [r.clause for r in rep.failures()]


def test_a4_violation_detected():
    ex = get_example("burgers_ou_levy", n_modes=8)
    bad = NoiseModel.power_law(8, a4_beta=4.0, a4_rho=3.0)  # beta(rho-2)/rho = 4/3
    assert not validate_assumptions(ex.coeffs, bad, ex.basis)["A4"].passed
