import math
from dataclasses import replace

import numpy as np
import pytest

from slowfast_burgers.experiments import (System, loglog_slope, run_auxiliary_gap,
                                          run_convergence_sweep, run_increment_diagnostic,
                                          run_moment_diagnostics, sup_error_path)
from slowfast_burgers.integrators import SimulationConfig, SystemCoefficients, SystemNoise
from slowfast_burgers.noise import NoiseModel
from slowfast_burgers.registry import get_example
from slowfast_burgers.spectral import ConfigurationError


def zero2(x, y):
    return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))


def small_system(name="burgers_ou_levy", n=8):
    return System.from_example(get_example(name, n_modes=n))


def heat_system(n=4):
    q = NoiseModel(np.zeros(n), levy_rate=0.0)
    coeffs = SystemCoefficients(f1=zero2, f2=zero2, burgers=False, analytic_fbar=lambda x: 0 * x)
    x0 = np.zeros(n)
    x0[0] = 1.0
    return System(coeffs, SystemNoise(q, q), x0, np.zeros(n))


# sup_error_path --------------------------------------------------------------

def test_sup_error_identical_is_zero():
    a = np.random.default_rng(0).standard_normal((5, 11, 4))
    assert np.array_equal(sup_error_path(a, a, 3), np.zeros(5))


def test_sup_error_constant_difference():
    a = np.zeros((7, 3))
    b = a.copy()
    b[:, 0] = 0.5
    assert sup_error_path(b, a, 2) == pytest.approx(0.25)


def test_sup_error_power_relation():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 3, 20, 5))
    # exhaustive over stored steps
    d = np.sqrt(((a - b) ** 2).sum(-1)).max(-1)
    assert np.allclose(sup_error_path(a, b, 2), d**2)
    assert np.allclose(sup_error_path(a, b, 4), sup_error_path(a, b, 2) ** 2)


def test_sup_error_grid_mismatch():
    with pytest.raises(ConfigurationError):
        sup_error_path(np.zeros((5, 3)), np.zeros((6, 3)), 2)


# sweep -------------------------------------------------------------------------

def test_sweep_empty_horizon():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.0, n_modes=8)
    rep = run_convergence_sweep(cfg, small_system(), [0.1], [3.0], M=1)
    assert rep.cell(0.1, 3.0).estimate == 0.0
    assert rep.warnings


def test_sweep_coupling_identity():
    sysm = small_system()
    sysm = replace(sysm, coeffs=replace(sysm.coeffs, f1=lambda x, y: sysm.fbar(x)))
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.1, n_modes=8)
    rep = run_convergence_sweep(cfg, sysm, [0.1, 0.01], [2.0], M=8)
    assert max(c.estimate for c in rep.cells) <= 1e-24


def test_sweep_thread_count_does_not_matter():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.1, n_modes=8, chunk_size=3)
    a = run_convergence_sweep(cfg, small_system(), [0.1, 0.01], M=10, threads=1)
    b = run_convergence_sweep(cfg, small_system(), [0.1, 0.01], M=10, threads=4)
    assert [c.estimate for c in a.cells] == [c.estimate for c in b.cells]
    assert [c.stderr for c in a.cells] == [c.stderr for c in b.cells]


def test_sweep_accounting():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.05, n_modes=8)
    rep = run_convergence_sweep(cfg, small_system(), [0.1], M=5)
    for c in rep.cells:
        assert c.m_effective + c.exclusions == 5
        assert c.estimate >= 0 and math.isfinite(c.stderr)


def test_sweep_standard_error_scaling():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.1, n_modes=8, chunk_size=50)
    se = [run_convergence_sweep(cfg, small_system(), [0.1], [2.0], M=m).cells[0].stderr
          for m in (400, 800)]
    assert se[0] / se[1] == pytest.approx(math.sqrt(2), rel=0.2)


def test_sweep_counts_blowups():
    sysm = small_system(n=32)
    x0 = np.zeros(32)
    x0[0] = 100.0
    cfg = SimulationConfig(epsilon=0.1, dt=0.01, T=0.5, n_modes=32)
    rep = run_convergence_sweep(cfg, replace(sysm, x0=x0), [0.1], M=2)
    assert rep.failed and rep.cells[0].exclusions == 2


# diagnostics -------------------------------------------------------------------

def test_moment_deterministic_decay():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.1, n_modes=4)
    rep = run_moment_diagnostics(cfg, heat_system(), [1.0], [0.1], M=2)
    assert rep.rows[0].sup_x_moment == pytest.approx(1.0, abs=1e-15)
    assert rep.rows[0].sup_y_moment == 0.0


def test_moment_rejects_small_q():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.1, n_modes=4)
    with pytest.raises(ConfigurationError):
        run_moment_diagnostics(cfg, heat_system(), [0.5], [0.1], M=2)


def test_moment_ratio_stable_across_epsilon():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.2, n_modes=8)
    rep = run_moment_diagnostics(cfg, small_system(), [1.0], [0.1, 0.01], M=20)
    a, b = rep.column("sup_x_moment", 1.0)
    assert 0.5 <= a / b <= 2
    ys = rep.column("sup_y_moment", 1.0)
    assert all(math.isfinite(v) for v in ys) and max(ys) < 2 * min(ys)
    assert not rep.flags()


def test_increment_heat_flow_oracle():
    cfg = SimulationConfig(epsilon=0.1, dt=5e-5, T=0.1, n_modes=4)
    hs = [0.0, 1e-3, 5e-4, 2.5e-4]
    rep = run_increment_diagnostic(cfg, heat_system(), hs, M=1, t_fixed=0.1)
    lam = math.pi**2
    want = [(math.exp(-lam * (0.1 + h)) - math.exp(-lam * 0.1)) ** 2 for h in hs]
    assert np.allclose(rep.means, want, rtol=1e-9, atol=1e-300)
    assert rep.means[0] == 0.0
    assert loglog_slope(hs[1:], rep.means[1:]) == pytest.approx(2.0, abs=0.01)


def test_increment_off_grid_rejected():
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.1, n_modes=4)
    with pytest.raises(ConfigurationError):
        run_increment_diagnostic(cfg, heat_system(), [1.5e-3], M=1)


def test_auxiliary_gap_constant_slow_input():
    ex = get_example("burgers_ou_levy_coupled", n_modes=8)
    q = NoiseModel(np.zeros(8), levy_rate=0.0)
    coeffs = replace(ex.coeffs, f1=zero2, h1=None, burgers=False, viscosity=0.0)
    sysm = System(coeffs, SystemNoise(q, ex.noise.fast), ex.x0, ex.y0)
    cfg = SimulationConfig(epsilon=0.01, dt=1e-3, T=0.2, n_modes=8)
    rep = run_auxiliary_gap(cfg, sysm, [0.1, 0.05, 0.025], M=4)
    assert rep.means == [0.0, 0.0, 0.0]


def test_auxiliary_gap_shrinks_with_delta():
    cfg = SimulationConfig(epsilon=0.01, dt=1e-3, T=0.2, n_modes=8)
    rep = run_auxiliary_gap(cfg, small_system("burgers_ou_levy_coupled"), [0.1, 0.05, 0.025],
                            M=20)
    assert rep.decreasing and rep.slope > 0.5


def test_auxiliary_delta_must_divide_horizon():
    cfg = SimulationConfig(epsilon=0.01, dt=1e-3, T=0.2, n_modes=8)
    with pytest.raises(ConfigurationError):
        run_auxiliary_gap(cfg, small_system(), [0.03], M=1)
