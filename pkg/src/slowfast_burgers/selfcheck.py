"""Fast oracle checks run by ``slowfast-burgers selfcheck``.

Each check compares an implementation path against an independent closed
form or a degenerate case; all together they take a few seconds.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .averaging import analytic_averaged_drift, validate_assumptions
from .experiments import sup_error_path
from .integrators import (SimulationConfig, SystemCoefficients, SystemNoise, run_averaged_batch,
                          run_slow_fast_batch, sample_paths)
from .noise import NoiseModel, UniformMarks, compensated_jump_contribution, path_rng
from .registry import get_example
from .spectral import (build_basis, burgers_nonlinearity, h_alpha_norm, inner, semigroup_apply,
                       trilinear_b)

CHECKS = []


def check(func):
    CHECKS.append(func)
    return func


def _e(k, n=8, a=1.0):
    v = np.zeros(n)
    v[k - 1] = a
    return v


@check
def eigenvalues():
    lam = build_basis(3, 16).eigenvalues
    return np.allclose(lam, [math.pi**2, 4 * math.pi**2, 9 * math.pi**2], rtol=1e-14), f"{lam}"


@check
def semigroup_scalar():
    v = semigroup_apply(_e(1), 0.1, 1.0)[0]
    return abs(v - math.exp(-0.1 * math.pi**2)) < 1e-14, f"{v:.15g}"


@check
def nonlinearity_e1():
    b = burgers_nonlinearity(_e(1), build_basis(8))
    target = _e(2, a=math.pi / math.sqrt(2))
    return np.allclose(b, target, atol=1e-12), f"B(e1)_2 = {b[1]:.15g}"


@check
def trilinear_e1_e1_e2():
    v = float(trilinear_b(_e(1), _e(1), _e(2), build_basis(8)))
    return abs(v - math.pi / math.sqrt(2)) < 1e-12, f"{v:.15g}"


@check
def energy_neutrality():
    rng = np.random.default_rng(1)
    basis = build_basis(32)
    x = rng.standard_normal((100, 32))
    val = np.abs(inner(burgers_nonlinearity(x, basis), x)).max()
    scale = (np.linalg.norm(x, axis=-1) ** 3).max()
    return val <= 1e-8 * scale, f"max |<B(X),X>| = {val:.3g}"


@check
def h_alpha():
    basis = build_basis(4)
    vals = [float(h_alpha_norm(_e(1, 4), 0, basis)), float(h_alpha_norm(_e(1, 4), 1, basis)),
            float(h_alpha_norm(_e(2, 4), 2, basis))]
    return np.allclose(vals, [1, math.pi, 4 * math.pi**2], rtol=1e-14), f"{vals}"


@check
def jump_direct_evaluation():
    model = NoiseModel(np.ones(4), levy_rate=0.0, marks=UniformMarks())
    out = compensated_jump_contribution(_e(1, 4, 2.0), lambda u, z: u * z, [0.5], model, 0.01)
    return np.allclose(out, _e(1, 4, 1.0)), f"{out}"


@check
def qwiener_variance():
    model = NoiseModel(np.array([1.0, 0.25, 0.0]))
    rng = path_rng(7, 0, 0)
    xi = rng.standard_normal((100_000, 3)) * np.sqrt(model.q_coeffs * 0.01)
    var = xi[:, 1].var()
    return abs(var / 0.0025 - 1) < 0.05 and not xi[:, 2].any(), f"var = {var:.5g}"


@check
def linear_skeleton():
    basis = build_basis(4)
    zero = lambda x, y: np.zeros_like(x)  # noqa: E731
    coeffs = SystemCoefficients(f1=zero, f2=zero, burgers=False, c=1.0)
    quiet = NoiseModel(np.zeros(4), levy_rate=0.0)
    cfg = SimulationConfig(epsilon=0.5, dt=0.01, T=0.5, n_modes=4, exact_fast=False)
    path = sample_paths(cfg, coeffs, SystemNoise(quiet, quiet), [0])
    res = run_slow_fast_batch(_e(1, 4), np.zeros(4), coeffs, SystemNoise(quiet, quiet), cfg, path)
    exact = np.exp(-basis.eigenvalues[0] * cfg.times())
    err = np.abs(res.x[0, :, 0] - exact).max()
    return err < 1e-12, f"max error {err:.3g}"


@check
def coupling_identity():
    ex = get_example("burgers_ou_levy", n_modes=8)
    fbar = ex.fbar
    coeffs = replace(ex.coeffs, f1=lambda x, y: fbar(x))
    cfg = SimulationConfig(epsilon=0.1, dt=1e-3, T=0.2, n_modes=8)
    paths = sample_paths(cfg, coeffs, ex.noise, range(4))
    a = run_slow_fast_batch(ex.x0, ex.y0, coeffs, ex.noise, cfg, paths)
    b = run_averaged_batch(ex.x0, fbar, coeffs, ex.noise, cfg, paths)
    err = sup_error_path(a.x, b.x, 2).max()
    return err <= 1e-24, f"max sup error^2 {err:.3g}"


@check
def analytic_drift():
    v = analytic_averaged_drift("burgers_ou_levy")(_e(1, 4, 2.0))
    return np.allclose(v, _e(1, 4, -2.0)), f"{v}"


@check
def assumptions_example():
    ex = get_example("burgers_ou_levy")
    rep = validate_assumptions(ex.coeffs, ex.noise, ex.basis)
    return rep.passed, rep.to_text().strip().replace("\n", "; ")


def run_all(stream=print) -> bool:
    ok_all = True
    for func in CHECKS:
        try:
            ok, detail = func()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        stream(f"{'PASS' if ok else 'FAIL'}  {func.__name__}: {detail}")
    return ok_all
