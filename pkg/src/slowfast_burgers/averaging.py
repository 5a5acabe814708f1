"""Averaged drift and assumption checks.

The averaged drift is ``fbar(x) = E_{mu^x}[f1(x, Y)]`` where ``mu^x`` is the
invariant law of the frozen fast equation.  It is estimated by a single long
time average of ``f1(x, Y_t^x)`` after a burn-in, with batch-means standard
errors.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .integrators import SystemCoefficients, SystemNoise, simulate_frozen
from .noise import NoiseModel
from .registry import EXAMPLES, get_example
from .spectral import BasisSpec, ConfigurationError, SpectralField, h_alpha_norm, l2_norm


@dataclass
class ErgodicEstimate:
    drift_value: SpectralField
    burn_in: float
    horizon: float
    standard_error: np.ndarray
    n_batches: int

    def __post_init__(self):
        if not self.horizon > self.burn_in:
            raise ConfigurationError("horizon must exceed burn_in")
        if not np.all(np.isfinite(self.standard_error)):
            raise ValueError("non-finite standard error")

    @property
    def l2_standard_error(self) -> float:
        return float(np.sqrt(np.sum(self.standard_error**2)))


def default_burn_in(coeffs: SystemCoefficients, basis: BasisSpec) -> float:
    """Ten mixing times ``10 / eta``."""
    eta = coeffs.eta(basis)
    if eta <= 0:
        raise ConfigurationError(f"dissipativity constant eta={eta} is not positive")
    return 10.0 / eta


def estimate_averaged_drift(x: SpectralField, coeffs: SystemCoefficients, noise: SystemNoise,
                            burn_in: float | None, horizon: float, dt: float,
                            rng: np.random.Generator, y0: SpectralField | None = None,
                            n_batches: int = 20, basis: BasisSpec | None = None
                            ) -> ErgodicEstimate:
    """Birkhoff average of ``f1(x, Y_t)`` along one frozen trajectory.

    ``burn_in=None`` uses ``10 / eta``.  The average is the left-point rule on
    the steps after burn-in; the standard error comes from ``n_batches``
    contiguous batch means.
    """
    x = np.asarray(x, dtype=float)
    if basis is None:
        from .spectral import build_basis
        basis = build_basis(x.shape[-1])
    if coeffs.eta(basis) <= 0:
        raise ConfigurationError("(A3) fails: frozen equation has no guaranteed invariant law")
    if burn_in is None:
        burn_in = default_burn_in(coeffs, basis)
    if not horizon > burn_in:
        raise ConfigurationError(f"horizon={horizon} must exceed burn_in={burn_in}")
    if y0 is None:
        y0 = np.zeros_like(x)
    traj = simulate_frozen(x, y0, coeffs, noise, horizon, dt, rng)
    start = int(round(burn_in / dt))
    ys = traj.x[start:-1]
    values = coeffs.f1(np.broadcast_to(x, ys.shape), ys)
    n = values.shape[0]
    if n < n_batches:
        raise ConfigurationError("averaging window shorter than the number of batches")
    size = n // n_batches
    batch_means = values[: size * n_batches].reshape(n_batches, size, -1).mean(axis=1)
    se = batch_means.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return ErgodicEstimate(values.mean(axis=0), burn_in, horizon, se, n_batches)


def analytic_averaged_drift(example_id: str):
    """Closed-form averaged drift of a registered example."""
    if example_id not in EXAMPLES:
        raise KeyError(f"no analytic averaged drift for {example_id!r}")
    return get_example(example_id, n_modes=1).coeffs.analytic_fbar


@dataclass
class ClauseResult:
    clause: str
    passed: bool
    detail: str


@dataclass
class ValidationReport:
    results: list[ClauseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[ClauseResult]:
        return [r for r in self.results if not r.passed]

    def __getitem__(self, clause: str) -> ClauseResult:
        for r in self.results:
            if r.clause == clause:
                return r
        raise KeyError(clause)

    def to_text(self) -> str:
        lines = [f"{r.clause}: {'PASS' if r.passed else 'FAIL'}  {r.detail}" for r in self.results]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["clause", "passed", "detail"])
        for r in self.results:
            w.writerow([r.clause, int(r.passed), r.detail])
        return buf.getvalue()


def _random_fields(rng, basis, n, scale=2.0):
    decay = 1.0 / np.arange(1, basis.n_modes + 1)
    return scale * rng.standard_normal((n, basis.n_modes)) * decay


def _worst_ratio(lhs, rhs):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / rhs, np.where(lhs > 1e-12, np.inf, 0.0))
    return float(np.max(r))


_TOL = 1e-9


def validate_assumptions(coeffs: SystemCoefficients, noise: SystemNoise | NoiseModel,
                         basis: BasisSpec, rng: np.random.Generator | None = None,
                         n_pairs: int = 1000, gammas=(1.0, 2.0, 4.0),
                         alpha_reg: float = 1.0) -> ValidationReport:
    """Check (A1)-(A4) for the given coefficients.

    (A1) and (A2) are probabilistic: growth and Lipschitz bounds are tested on
    ``n_pairs`` random field pairs against the declared constants.  (A3) and
    (A4) are exact arithmetic on the declared constants and the truncated
    noise spectrum.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if isinstance(noise, NoiseModel):
        noise = SystemNoise(noise, noise)
    rep = ValidationReport()
    x1, x2, y1, y2 = (_random_fields(rng, basis, n_pairs) for _ in range(4))
    dx, dy = l2_norm(x1 - x2), l2_norm(y1 - y2)

    # (A1)
    worst = 0.0
    for name, f, L in (("f1", coeffs.f1, coeffs.L_f1), ("f2", coeffs.f2, coeffs.L_f2)):
        a, b = f(x1, y1), f(x2, y2)
        lip = _worst_ratio(l2_norm(a - b), L * (dx + dy))
        growth = _worst_ratio(l2_norm(a), L * (1 + l2_norm(x1) + l2_norm(y1)))
        worst = max(worst, lip, growth)
        if max(lip, growth) > 1 + _TOL:
            rep.results.append(ClauseResult(
                "A1", False, f"{name}: sampled ratio {max(lip, growth):.4g} exceeds declared L={L}"))
            break
    else:
        rep.results.append(ClauseResult("A1", True, f"max sampled ratio {worst:.4g}"))

    # (A2)
    rep.results.append(_check_a2(coeffs, noise, basis, x1, x2, y1, y2, gammas, alpha_reg))

    # (A3)
    eta = coeffs.eta(basis)
    rep.results.append(ClauseResult(
        "A3", eta > 0, f"eta = 2*lambda1 - L_f2 - L_h2 = {eta:.6g}"))

    # (A4)
    rep.results.append(_check_a4(noise.slow, basis, "Q1"))
    if noise.fast is not noise.slow:
        r = _check_a4(noise.fast, basis, "Q2")
        if not r.passed:
            rep.results[-1] = ClauseResult("A4", False, rep.results[-1].detail + "; " + r.detail)
    return rep


def _mark_integral(model: NoiseModel, func):
    """``int func(z) mu(dz)`` for the finite-activity Lévy measure."""
    return model.levy_rate * model.marks.expect(func)


def _check_a2(coeffs, noise, basis, x1, x2, y1, y2, gammas, alpha_reg) -> ClauseResult:
    dx, dy = l2_norm(x1 - x2), l2_norm(y1 - y2)
    worst = 0.0
    checks = []
    if coeffs.h1 is not None:
        h = coeffs.h1
        L = coeffs.L_h1
        for g in gammas:
            lhs = _mark_integral(noise.slow, lambda z: l2_norm(h(x1, z) - h(x2, z)) ** g)
            checks.append((f"h1 Lipschitz gamma={g}", lhs, L * dx**g))
            lhs = _mark_integral(noise.slow,
                                 lambda z: h_alpha_norm(h(x1, z), alpha_reg, basis) ** g)
            checks.append((f"h1 H^{alpha_reg} growth gamma={g}", lhs,
                           L * (1 + h_alpha_norm(x1, alpha_reg, basis) ** g)))
            zero = np.zeros(basis.n_modes)
            m = _mark_integral(noise.slow, lambda z: l2_norm(h(zero, z)) ** g)
            if not np.isfinite(m):
                return ClauseResult("A2", False, f"h1(0, z) moment of order {g} is not finite")
    if coeffs.h2 is not None:
        h = coeffs.h2
        L = coeffs.L_h2
        for g in gammas:
            lhs = _mark_integral(noise.fast,
                                 lambda z: l2_norm(h(x1, y1, z) - h(x2, y2, z)) ** g)
            checks.append((f"h2 Lipschitz gamma={g}", lhs, L * (dx**g + dy**g)))
    for label, lhs, rhs in checks:
        r = _worst_ratio(np.asarray(lhs), np.asarray(rhs))
        worst = max(worst, r)
        if r > 1 + _TOL:
            return ClauseResult("A2", False, f"{label}: sampled ratio {r:.4g} exceeds declared bound")
    if not checks:
        return ClauseResult("A2", True, "no jump coefficients")
    return ClauseResult("A2", True, f"max sampled ratio {worst:.4g}")


def _check_a4(model: NoiseModel, basis: BasisSpec, label: str) -> ClauseResult:
    beta, rho = model.a4_beta, model.a4_rho
    alpha = model.q_coeffs
    if not (beta > 0 and rho > 2):
        return ClauseResult("A4", False, f"{label}: need beta > 0 and rho > 2 (beta={beta}, rho={rho})")
    exponent = beta * (rho - 2) / rho
    total = float(np.sum(alpha**rho / basis.eigenvalues[: alpha.size] ** beta))
    trace = float(np.sum(alpha))
    ok = exponent < 1 and np.isfinite(total) and np.isfinite(trace)
    return ClauseResult("A4", ok, f"{label}: sum alpha^rho/lambda^beta = {total:.6g}, "
                                  f"beta(rho-2)/rho = {exponent:.4g}, trace = {trace:.6g}")
