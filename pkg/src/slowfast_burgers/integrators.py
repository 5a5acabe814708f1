"""Exponential-Euler steppers for the slow-fast stochastic Burgers system.

Slow component, one step of length ``dt``::

    X <- S(dt) [ X + dt * (B(X) + f1(X, Y)) + dW1 + J1 ]

with ``S(t) = exp(t A)`` applied exactly per mode, ``B`` the Burgers term and
``J1`` the compensated jump sum of ``h1`` over the step.  Fast component::

    Y <- S_c(dt / eps) [ Y + (dt / eps) f2(X, Y) + dW2 / sqrt(eps) + J2 ]

where ``J2`` is compensated at the accelerated rate ``levy_rate / eps``.  When
the fast drift is affine, ``f2(x, y) = -kappa * y + g(x)``, the Gaussian part
of the fast step is replaced by its exact Ornstein-Uhlenbeck transition, so no
``dt << eps`` restriction applies.

All loops run on a batch of paths at once (leading array axis).  Rows never
interact, so a path's trajectory is the same whatever batch it sits in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import noise as nz
from .noise import NoiseModel, NoisePath
from .spectral import (BasisSpec, ConfigurationError, SpectralField, build_basis,
                       burgers_nonlinearity)

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    """Numerical blow-up of a trajectory."""

    def __init__(self, time: float, path_index=None, seed=None):
        self.time = time
        self.path_index = path_index
        self.seed = seed
        super().__init__(
            f"non-finite or exploding state at t={time:.6g} "
            f"(path {path_index}, seed {seed})")


@dataclass
class SystemCoefficients:
    """Coefficients of the slow-fast system.

    ``f1(x, y)``, ``f2(x, y)``, ``h1(x, z)`` and ``h2(x, y, z)`` act on
    coefficient arrays (with optional leading batch axes) and a scalar mark
    ``z``.  ``fast_rate``/``fast_forcing`` declare an affine fast drift
    ``f2(x, y) = -fast_rate * y + fast_forcing(x)``, enabling the exact fast
    transition; ``f2`` must agree with that declaration.
    """

    f1: Callable
    f2: Callable
    h1: Callable | None = None
    h2: Callable | None = None
    L_f1: float = 1.0
    L_f2: float = 1.0
    L_h1: float = 0.0
    L_h2: float = 0.0
    c: float = 0.0
    analytic_fbar: Callable | None = None
    fast_rate: float | None = None
    fast_forcing: Callable | None = None
    burgers: bool = True
    viscosity: float = 1.0

    def __post_init__(self):
        if self.c < 0:
            raise ConfigurationError(f"fast diffusion c must be >= 0, got {self.c}")

    def eta(self, basis: BasisSpec) -> float:
        """Dissipativity constant ``2 lambda_1 - L_f2 - L_h2``."""
        return 2.0 * basis.lambda1 - self.L_f2 - self.L_h2

    @property
    def fast_is_affine(self) -> bool:
        return self.fast_rate is not None


@dataclass
class SystemNoise:
    slow: NoiseModel
    fast: NoiseModel


@dataclass
class SimulationConfig:
    epsilon: float = 0.1
    dt: float = 1e-4
    T: float = 1.0
    n_modes: int = 32
    grid_size: int | None = None
    delta: float | None = None
    mc_samples: int = 200
    p_exponents: Sequence[float] = (3.0, 4.0)
    seed: int = 2024
    exact_fast: bool = True
    blowup_threshold: float = 1e8
    chunk_size: int = 16

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.T < 0:
            raise ConfigurationError(f"T must be >= 0, got {self.T}")
        _steps(self.T, self.dt, "T")
        if self.delta is None:
            # sqrt(eps) snapped to the step grid
            steps = max(1, round(math.sqrt(self.epsilon) / self.dt))
            if self.T > 0:
                steps = min(steps, max(1, round(self.T / self.dt)))
            self.delta = steps * self.dt
        if self.delta < self.dt * (1 - 1e-9):
            raise ConfigurationError(f"delta={self.delta} smaller than dt={self.dt}")
        if self.T > 0 and self.delta > self.T * (1 + 1e-9):
            raise ConfigurationError(f"delta={self.delta} exceeds T={self.T}")
        _steps(self.delta, self.dt, "delta")
        if self.mc_samples < 1:
            raise ConfigurationError("mc_samples must be >= 1")
        if any(p < 2 for p in self.p_exponents):
            raise ConfigurationError(f"error exponents must be >= 2, got {self.p_exponents}")
        if self.chunk_size < 1:
            raise ConfigurationError("chunk_size must be >= 1")
        self.p_exponents = tuple(float(p) for p in self.p_exponents)
        self.basis  # validates n_modes / grid_size

    @property
    def n_steps(self) -> int:
        return _steps(self.T, self.dt, "T")

    @property
    def delta_steps(self) -> int:
        return _steps(self.delta, self.dt, "delta")

    @property
    def basis(self) -> BasisSpec:
        return build_basis(self.n_modes, self.grid_size)

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def replace(self, **changes) -> "SimulationConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if "epsilon" in changes and "delta" not in changes:
            values["delta"] = None
        values.update(changes)
        return SimulationConfig(**values)


def _steps(span: float, dt: float, name: str) -> int:
    n = round(span / dt)
    if abs(n * dt - span) > 1e-9 * max(1.0, span):
        raise ConfigurationError(f"{name}={span} is not a whole number of steps dt={dt}")
    return int(n)


_warned: set = set()


def check_config(cfg: SimulationConfig, coeffs: SystemCoefficients) -> None:
    """Time-step checks that depend on the coefficients."""
    if not (cfg.exact_fast and coeffs.fast_is_affine) and cfg.dt > cfg.epsilon / 10 * (1 + 1e-12):
        raise ConfigurationError(
            f"explicit fast drift needs dt <= epsilon/10 (dt={cfg.dt}, epsilon={cfg.epsilon})")
    key = (cfg.dt, cfg.n_modes)
    if coeffs.burgers and cfg.dt * cfg.n_modes**2 > 0.5 / np.pi**2 and key not in _warned:
        _warned.add(key)
        log.warning("dt * N^2 = %.3g exceeds the explicit-advection guideline %.3g",
                    cfg.dt * cfg.n_modes**2, 0.5 / np.pi**2)


@dataclass
class SlowFastState:
    x: SpectralField
    y: SpectralField
    t: float = 0.0


@dataclass
class StepNoise:
    """Standard-normal draws and jump marks for one step of one path."""

    slow_xi: np.ndarray
    fast_xi: np.ndarray
    slow_marks: Sequence[float] = ()
    fast_marks: Sequence[float] = ()


class Stepper:
    """Precomputed per-mode factors for one (coefficients, noise, config) triple."""

    def __init__(self, coeffs: SystemCoefficients, noise: SystemNoise, cfg: SimulationConfig,
                 epsilon: float | None = None):
        self.coeffs = coeffs
        self.noise = noise
        self.cfg = cfg
        self.basis = cfg.basis
        self.dt = dt = cfg.dt
        self.eps = eps = cfg.epsilon if epsilon is None else epsilon
        lam = self.basis.eigenvalues
        for model in (noise.slow, noise.fast):
            if model.n_modes != self.basis.n_modes:
                raise ConfigurationError("noise model and basis disagree on n_modes")

        self.slow_decay = np.exp(-coeffs.viscosity * lam * dt)
        self.slow_noise_gain = np.sqrt(noise.slow.q_coeffs * dt)

        self.exact_fast = cfg.exact_fast and coeffs.fast_is_affine
        if self.exact_fast:
            rate = coeffs.c * lam + coeffs.fast_rate
            if np.any(rate <= 0):
                raise ConfigurationError("exact fast transition needs c*lambda_k + kappa > 0")
            decay = np.exp(-rate * dt / eps)
            self.fast_decay = decay
            self.fast_forcing_gain = -np.expm1(-rate * dt / eps) / rate
            self.fast_noise_gain = np.sqrt(noise.fast.q_coeffs * -np.expm1(-2 * rate * dt / eps)
                                           / (2 * rate))
        else:
            self.fast_decay = np.exp(-coeffs.c * lam * dt / eps)
            self.fast_noise_gain = np.sqrt(noise.fast.q_coeffs * dt / eps)

    # slow ---------------------------------------------------------------

    def slow_step(self, x, drift_value, xi, events=None):
        """One slow step given ``drift_value = f1(x, y)`` (or ``fbar(x)``)."""
        c = self.coeffs
        rhs = drift_value
        if c.burgers:
            rhs = rhs + burgers_nonlinearity(x, self.basis)
        incr = x + self.dt * rhs + self.slow_noise_gain * xi
        if c.h1 is not None:
            incr = incr - nz.compensator(x, c.h1, self.noise.slow, self.dt)
            if events:
                incr = _add_jumps(incr, events, lambda row, z: c.h1(x[row], z))
        return self.slow_decay * incr

    # fast ---------------------------------------------------------------

    def fast_step(self, x, y, xi, events=None):
        c = self.coeffs
        dt, eps = self.dt, self.eps
        if self.exact_fast:
            forcing = c.fast_forcing(x) if c.fast_forcing is not None else 0.0
            y_new = self.fast_decay * y + self.fast_forcing_gain * forcing + self.fast_noise_gain * xi
            if c.h2 is not None:
                jumps = self._fast_jumps(x, y, events)
                y_new = y_new + self.fast_decay * jumps
            return y_new
        incr = y + (dt / eps) * c.f2(x, y) + self.fast_noise_gain * xi
        if c.h2 is not None:
            incr = incr + self._fast_jumps(x, y, events)
        return self.fast_decay * incr

    def _fast_jumps(self, x, y, events):
        c = self.coeffs
        out = -nz.compensator(np.broadcast_to(y, np.broadcast_shapes(np.shape(x), np.shape(y))),
                              lambda _y, z: c.h2(x, y, z), self.noise.fast, self.dt,
                              rate_scale=1.0 / self.eps)
        if events:
            xb = np.broadcast_to(x, out.shape)
            out = _add_jumps(out, events, lambda row, z: c.h2(xb[row], y[row], z))
        return out


def _add_jumps(arr, events, contribution):
    """``events`` is a list of ``(row, mark)``; ``row`` is ``...`` for unbatched."""
    arr = np.array(arr, dtype=float, copy=True)
    for row, z in events:
        arr[row] = arr[row] + contribution(row, z)
    return arr


def _guard(arr, threshold, failed_at, step_time):
    """Mark rows that exploded; poison them with NaN so they stay flagged."""
    with np.errstate(invalid="ignore"):
        bad = ~(np.abs(arr).max(axis=-1) <= threshold)
    if bad.any():
        new = bad & np.isnan(failed_at)
        failed_at[new] = step_time
        arr[bad] = np.nan
    return arr


def _events_by_step(records: Sequence[nz.JumpRecord]) -> dict[int, list[tuple[int, float]]]:
    out: dict[int, list[tuple[int, float]]] = {}
    for row, rec in enumerate(records):
        for s, z in zip(rec.steps.tolist(), rec.marks.tolist()):
            out.setdefault(s, []).append((row, z))
    return out


def _batch_initial(v, n_paths, n_modes):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != n_modes:
        raise ConfigurationError(f"initial data has {v.shape[-1]} modes, expected {n_modes}")
    return np.array(np.broadcast_to(v, (n_paths, n_modes)), dtype=float)


def _check_replay(paths: Sequence[NoisePath], cfg: SimulationConfig):
    for p in paths:
        if p.n_steps < cfg.n_steps or p.n_modes != cfg.n_modes:
            raise ConfigurationError(
                f"noise path shape ({p.n_steps}, {p.n_modes}) does not cover "
                f"({cfg.n_steps}, {cfg.n_modes})")


@dataclass
class BatchResult:
    x: np.ndarray  # (paths, steps + 1, modes)
    y: np.ndarray | None  # same shape when recorded
    failed_at: np.ndarray  # blow-up time per path, NaN if none
    times: np.ndarray = field(repr=False, default=None)

    @property
    def ok(self) -> np.ndarray:
        return np.isnan(self.failed_at)


def sample_paths(cfg: SimulationConfig, coeffs: SystemCoefficients, noise: SystemNoise,
                 indices: Sequence[int], epsilon: float | None = None) -> list[NoisePath]:
    eps = cfg.epsilon if epsilon is None else epsilon
    return [NoisePath.sample(cfg.seed, i, cfg.n_steps, cfg.dt, noise.slow, noise.fast, eps,
                             fast_jumps=coeffs.h2 is not None,
                             slow_jumps=coeffs.h1 is not None)
            for i in indices]


def run_slow_fast_batch(x0, y0, coeffs: SystemCoefficients, noise: SystemNoise,
                        cfg: SimulationConfig, paths: Sequence[NoisePath],
                        record_y: bool = False) -> BatchResult:
    """Coupled slow-fast trajectories for a batch of recorded noise paths."""
    _check_replay(paths, cfg)
    st = Stepper(coeffs, noise, cfg)
    n, m, B = cfg.n_steps, cfg.n_modes, len(paths)
    x = _batch_initial(x0, B, m)
    y = _batch_initial(y0, B, m)
    xs = np.empty((B, n + 1, m))
    xs[:, 0] = x
    ys = None
    if record_y:
        ys = np.empty((B, n + 1, m))
        ys[:, 0] = y
    slow_g = np.stack([p.slow_gauss[:n] for p in paths])
    fast_g = np.stack([p.fast_gauss[:n] for p in paths])
    slow_ev = _events_by_step([p.slow_jumps for p in paths])
    fast_ev = _events_by_step([p.fast_jumps for p in paths])
    failed = np.full(B, np.nan)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            x_new = st.slow_step(x, coeffs.f1(x, y), slow_g[:, i], slow_ev.get(i))
            y = st.fast_step(x, y, fast_g[:, i], fast_ev.get(i))
            x = _guard(x_new, cfg.blowup_threshold, failed, (i + 1) * cfg.dt)
            y = _guard(y, cfg.blowup_threshold, failed, (i + 1) * cfg.dt)
            xs[:, i + 1] = x
            if record_y:
                ys[:, i + 1] = y
    return BatchResult(xs, ys, failed, cfg.times())


def run_averaged_batch(x0, fbar: Callable, coeffs: SystemCoefficients, noise: SystemNoise,
                       cfg: SimulationConfig, paths: Sequence[NoisePath]) -> BatchResult:
    """Averaged equation driven by the slow noise of recorded paths."""
    _check_replay(paths, cfg)
    st = Stepper(coeffs, noise, cfg)
    n, m, B = cfg.n_steps, cfg.n_modes, len(paths)
    x = _batch_initial(x0, B, m)
    xs = np.empty((B, n + 1, m))
    xs[:, 0] = x
    slow_g = np.stack([p.slow_gauss[:n] for p in paths])
    slow_ev = _events_by_step([p.slow_jumps for p in paths])
    failed = np.full(B, np.nan)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            x = st.slow_step(x, fbar(x), slow_g[:, i], slow_ev.get(i))
            x = _guard(x, cfg.blowup_threshold, failed, (i + 1) * cfg.dt)
            xs[:, i + 1] = x
    return BatchResult(xs, None, failed, cfg.times())


def run_auxiliary_batch(x_traj: np.ndarray, y_traj: np.ndarray, coeffs: SystemCoefficients,
                        noise: SystemNoise, cfg: SimulationConfig,
                        paths: Sequence[NoisePath]) -> BatchResult:
    """Auxiliary fast process with the slow input frozen on the ``delta`` grid.

    On each ``[k delta, (k+1) delta)`` the process restarts from ``Y`` at the
    breakpoint and evolves with ``X`` held at its breakpoint value, using the
    same fast noise as ``Y``.
    """
    _check_replay(paths, cfg)
    n, m, B = cfg.n_steps, cfg.n_modes, len(paths)
    if x_traj.shape[:2] != (B, n + 1) or y_traj.shape[:2] != (B, n + 1):
        raise ConfigurationError("trajectories do not match the batch and step grid")
    k = cfg.delta_steps
    st = Stepper(coeffs, noise, cfg)
    fast_g = np.stack([p.fast_gauss[:n] for p in paths])
    fast_ev = _events_by_step([p.fast_jumps for p in paths])
    yh = np.array(y_traj[:, 0], dtype=float)
    out = np.empty((B, n + 1, m))
    out[:, 0] = yh
    failed = np.full(B, np.nan)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            if i % k == 0 and i > 0:
                yh = np.array(y_traj[:, i], dtype=float)
            x_frozen = x_traj[:, (i // k) * k]
            yh = st.fast_step(x_frozen, yh, fast_g[:, i], fast_ev.get(i))
            yh = _guard(yh, cfg.blowup_threshold, failed, (i + 1) * cfg.dt)
            out[:, i + 1] = yh
    return BatchResult(out, None, failed, cfg.times())


# single-path API ------------------------------------------------------------


def step_slow_fast(state: SlowFastState, coeffs: SystemCoefficients, noise: SystemNoise,
                   cfg: SimulationConfig, draws: StepNoise) -> SlowFastState:
    """Advance ``(X, Y)`` by one step of ``cfg.dt``."""
    st = Stepper(coeffs, noise, cfg)
    x, y = np.asarray(state.x, float), np.asarray(state.y, float)
    sev = [(..., z) for z in draws.slow_marks]
    fev = [(..., z) for z in draws.fast_marks]
    with np.errstate(over="ignore", invalid="ignore"):
        x_new = st.slow_step(x, coeffs.f1(x, y), np.asarray(draws.slow_xi, float), sev)
        y_new = st.fast_step(x, y, np.asarray(draws.fast_xi, float), fev)
    t_new = state.t + cfg.dt
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
        raise BlowUpError(t_new)
    return SlowFastState(x_new, y_new, t_new)


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray | None = None
    noise: NoisePath | None = None


def _raise_if_failed(res: BatchResult, paths: Sequence[NoisePath]):
    if not res.ok[0]:
        raise BlowUpError(float(res.failed_at[0]), paths[0].path_index, paths[0].seed)


def simulate_slow_fast(x0, y0, coeffs: SystemCoefficients, noise: SystemNoise,
                       cfg: SimulationConfig, path_index: int = 0,
                       replay: NoisePath | None = None) -> Trajectory:
    """One coupled path; the noise is drawn from ``(cfg.seed, path_index)`` unless replayed."""
    check_config(cfg, coeffs)
    path = replay if replay is not None else sample_paths(cfg, coeffs, noise, [path_index])[0]
    res = run_slow_fast_batch(x0, y0, coeffs, noise, cfg, [path], record_y=True)
    _raise_if_failed(res, [path])
    return Trajectory(res.times, res.x[0], res.y[0], path)


def simulate_averaged(x0, fbar: Callable, coeffs: SystemCoefficients, noise: SystemNoise,
                      cfg: SimulationConfig, replay: NoisePath) -> Trajectory:
    res = run_averaged_batch(x0, fbar, coeffs, noise, cfg, [replay])
    _raise_if_failed(res, [replay])
    return Trajectory(res.times, res.x[0], None, replay)


def simulate_auxiliary(x_traj, y_traj, coeffs: SystemCoefficients, noise: SystemNoise,
                       cfg: SimulationConfig, replay: NoisePath) -> Trajectory:
    res = run_auxiliary_batch(np.asarray(x_traj)[None], np.asarray(y_traj)[None], coeffs,
                              noise, cfg, [replay])
    _raise_if_failed(res, [replay])
    return Trajectory(res.times, res.x[0], None, replay)


def simulate_frozen(x_frozen, y0, coeffs: SystemCoefficients, noise: SystemNoise,
                    horizon: float, dt: float, rng: np.random.Generator,
                    exact: bool = True, threshold: float = 1e8) -> Trajectory:
    """Frozen fast equation at unit speed with the slow input fixed at ``x_frozen``."""
    n = _steps(horizon, dt, "horizon")
    basis = build_basis(noise.fast.n_modes)
    cfg = _FrozenConfig(dt=dt, n_modes=basis.n_modes, exact_fast=exact)
    st = Stepper(coeffs, noise, cfg, epsilon=1.0)
    x = np.asarray(x_frozen, dtype=float)
    y = np.array(y0, dtype=float)
    ys = np.empty((n + 1, y.shape[-1]))
    ys[0] = y
    gauss = rng.standard_normal((n, y.shape[-1]))
    events = {}
    if coeffs.h2 is not None:
        rec = nz.sample_jump_record(noise.fast, dt, n, rng)
        events = {s: [(..., z) for z in zs] for s, zs in rec.by_step().items()}
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            y = st.fast_step(x, y, gauss[i], events.get(i))
            if not np.abs(y).max() <= threshold:
                raise BlowUpError((i + 1) * dt)
            ys[i + 1] = y
    return Trajectory(np.arange(n + 1) * dt, ys)


@dataclass
class _FrozenConfig:
    """Minimal config for the unit-speed frozen equation."""

    dt: float
    n_modes: int
    exact_fast: bool = True
    epsilon: float = 1.0

    @property
    def basis(self) -> BasisSpec:
        return build_basis(self.n_modes)
