"""Monte Carlo experiments: averaging error sweep and moment/regularity diagnostics.

Work is split into fixed-size chunks of path indices.  Chunks run on a thread
pool, but chunk boundaries depend only on ``cfg.chunk_size`` and every
reduction is taken over per-path arrays ordered by path index, so results do
not depend on the number of threads.  Each path draws its noise from
``(cfg.seed, path_index)`` alone, which gives common random numbers across
the epsilon grid.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .integrators import (BatchResult, SimulationConfig, SystemCoefficients, SystemNoise,
                          check_config, run_auxiliary_batch, run_averaged_batch,
                          run_slow_fast_batch, sample_paths)
from .spectral import ConfigurationError, h_alpha_norm, l2_norm

log = logging.getLogger(__name__)

MAX_EXCLUDED_FRACTION = 0.01
MIN_PATHS_FOR_SE = 30


def sup_error_path(traj_slow: np.ndarray, traj_avg: np.ndarray, p: float) -> np.ndarray:
    """``(max_n ||X_n - Xbar_n||) ** p`` over the stored steps.

    Trajectories have shape ``(..., steps, modes)``; leading axes are kept.
    """
    traj_slow = np.asarray(traj_slow)
    traj_avg = np.asarray(traj_avg)
    if traj_slow.shape != traj_avg.shape:
        raise ConfigurationError(
            f"trajectory grids differ: {traj_slow.shape} vs {traj_avg.shape}")
    return sup_distance(traj_slow, traj_avg) ** p


def sup_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return l2_norm(a - b).max(axis=-1)


@dataclass
class System:
    """Everything needed to simulate: coefficients, noise, initial data, averaged drift."""

    coeffs: SystemCoefficients
    noise: SystemNoise
    x0: np.ndarray
    y0: np.ndarray
    fbar: Callable | None = None

    @classmethod
    def from_example(cls, ex) -> "System":
        return cls(ex.coeffs, ex.noise, ex.x0, ex.y0, ex.fbar)


def _chunks(m: int, size: int) -> list[range]:
    return [range(s, min(s + size, m)) for s in range(0, m, size)]


def _map(func, items, threads: int):
    if threads <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    if n == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


# convergence sweep -----------------------------------------------------------


@dataclass
class ErrorCell:
    epsilon: float
    p: float
    estimate: float
    stderr: float
    m_effective: int
    exclusions: int
    runtime_s: float

    @property
    def root_estimate(self) -> float:
        """``estimate ** (2 / p)``, the L^{p/2}(Omega; L2) reading of the error."""
        return self.estimate ** (2.0 / self.p)


@dataclass
class ErrorReport:
    cells: list[ErrorCell]
    mc_samples: int
    seed: int
    config_hash: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(c.exclusions > MAX_EXCLUDED_FRACTION * self.mc_samples for c in self.cells)

    def estimates(self, p: float) -> list[float]:
        return [c.estimate for c in self.cells if c.p == p]

    def epsilons(self) -> list[float]:
        return sorted({c.epsilon for c in self.cells}, reverse=True)

    def cell(self, epsilon: float, p: float) -> ErrorCell:
        for c in self.cells:
            if c.epsilon == epsilon and c.p == p:
                return c
        raise KeyError((epsilon, p))


def run_convergence_sweep(cfg: SimulationConfig, system: System, epsilons: Sequence[float],
                          p_list: Sequence[float] | None = None, M: int | None = None,
                          threads: int = 1) -> ErrorReport:
    """Estimate ``E[sup_t ||X^eps - Xbar||^p]`` on coupled paths for each epsilon."""
    p_list = tuple(cfg.p_exponents if p_list is None else p_list)
    M = cfg.mc_samples if M is None else M
    fbar = system.fbar or system.coeffs.analytic_fbar
    if fbar is None:
        raise ConfigurationError("the sweep needs an averaged drift (analytic fbar)")
    cfgs = [cfg.replace(epsilon=e, mc_samples=M) for e in epsilons]
    for c in cfgs:
        check_config(c, system.coeffs)
    chunks = _chunks(M, cfg.chunk_size)

    def work(item):
        ei, chunk = item
        c = cfgs[ei]
        t0 = time.perf_counter()
        paths = sample_paths(c, system.coeffs, system.noise, chunk)
        slow = run_slow_fast_batch(system.x0, system.y0, system.coeffs, system.noise, c, paths)
        avg = run_averaged_batch(system.x0, fbar, system.coeffs, system.noise, c, paths)
        d = sup_distance(slow.x, avg.x)
        return d, slow.ok & avg.ok, time.perf_counter() - t0

    items = [(ei, ch) for ei in range(len(cfgs)) for ch in chunks]
    results = dict(zip(items, _map(work, items, threads)))

    report = ErrorReport([], M, cfg.seed)
    if M < MIN_PATHS_FOR_SE:
        msg = f"M={M} is too small for reliable standard errors"
        log.warning(msg)
        report.warnings.append(msg)
    for ei, eps in enumerate(epsilons):
        parts = [results[(ei, ch)] for ch in chunks]
        d = np.concatenate([r[0] for r in parts])
        ok = np.concatenate([r[1] for r in parts])
        runtime = sum(r[2] for r in parts)
        excluded = int((~ok).sum())
        for p in p_list:
            est, se = _mean_se(d[ok] ** p)
            report.cells.append(ErrorCell(float(eps), float(p), est, se, int(ok.sum()),
                                          excluded, runtime))
        if excluded:
            log.warning("epsilon=%g: %d of %d paths blew up and were excluded", eps, excluded, M)
    return report


# diagnostics -----------------------------------------------------------------


@dataclass
class MomentRow:
    epsilon: float
    q: float
    sup_x_moment: float  # E[sup_t ||X||^{2q}]
    sup_x_moment_se: float
    sup_y_moment: float  # sup_t E[||Y_t||^{2q}]
    sup_h1_sq: float  # E[sup_t |X|_1^2]
    m_effective: int


@dataclass
class MomentReport:
    rows: list[MomentRow]
    growth_factor: float = 2.0

    def column(self, name: str, q: float) -> list[float]:
        return [getattr(r, name) for r in self.rows if r.q == q]

    def flags(self) -> list[str]:
        """Quantities varying by more than ``growth_factor`` across epsilon."""
        out = []
        for q in sorted({r.q for r in self.rows}):
            for name in ("sup_x_moment", "sup_y_moment", "sup_h1_sq"):
                vals = np.array(self.column(name, q))
                if vals.size > 1 and vals.max() > self.growth_factor * vals.min():
                    out.append(f"{name} (q={q}) varies by {vals.max() / vals.min():.3g}x")
        return out


def run_moment_diagnostics(cfg: SimulationConfig, system: System, q_list: Sequence[float],
                           epsilons: Sequence[float], M: int | None = None,
                           threads: int = 1) -> MomentReport:
    if any(q < 1 for q in q_list):
        raise ConfigurationError("moment orders q must be >= 1")
    M = cfg.mc_samples if M is None else M
    cfgs = [cfg.replace(epsilon=e, mc_samples=M) for e in epsilons]
    for c in cfgs:
        check_config(c, system.coeffs)
    chunks = _chunks(M, cfg.chunk_size)
    basis = cfg.basis

    def work(item):
        ei, chunk = item
        c = cfgs[ei]
        paths = sample_paths(c, system.coeffs, system.noise, chunk)
        res = run_slow_fast_batch(system.x0, system.y0, system.coeffs, system.noise, c, paths,
                                  record_y=True)
        xn = l2_norm(res.x)  # (paths, steps)
        yn = l2_norm(res.y)
        h1 = h_alpha_norm(res.x, 1.0, basis) ** 2
        return xn.max(axis=-1), yn, h1.max(axis=-1), res.ok

    items = [(ei, ch) for ei in range(len(cfgs)) for ch in chunks]
    results = dict(zip(items, _map(work, items, threads)))
    rows = []
    for ei, eps in enumerate(epsilons):
        parts = [results[(ei, ch)] for ch in chunks]
        xs = np.concatenate([r[0] for r in parts])
        ys = np.concatenate([r[1] for r in parts])
        h1 = np.concatenate([r[2] for r in parts])
        ok = np.concatenate([r[3] for r in parts])
        for q in q_list:
            mx, se = _mean_se(xs[ok] ** (2 * q))
            my = float(np.max(np.mean(ys[ok] ** (2 * q), axis=0)))
            rows.append(MomentRow(float(eps), float(q), mx, se, my, float(np.mean(h1[ok])),
                                  int(ok.sum())))
    return MomentReport(rows)


@dataclass
class SlopeReport:
    scales: list[float]
    means: list[float]
    stderrs: list[float]
    slope: float
    threshold: float = 0.8

    @property
    def decreasing(self) -> bool:
        """Strictly decreasing as the scale shrinks."""
        order = np.argsort(self.scales)[::-1]
        m = np.asarray(self.means)[order]
        return bool(np.all(np.diff(m) < 0))

    @property
    def passed(self) -> bool:
        return self.slope >= self.threshold and self.decreasing


def loglog_slope(scales, values) -> float:
    scales, values = np.asarray(scales, float), np.asarray(values, float)
    if np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(scales), np.log(values), 1)[0])


def run_increment_diagnostic(cfg: SimulationConfig, system: System, h_list: Sequence[float],
                             M: int | None = None, t_fixed: float = 0.5,
                             threads: int = 1) -> SlopeReport:
    """``E||X_{t+h} - X_t||^2`` at a fixed interior time against ``h``."""
    M = cfg.mc_samples if M is None else M
    dt = cfg.dt
    offsets = []
    for h in h_list:
        k = round(h / dt)
        if h < 0 or abs(k * dt - h) > 1e-9 * max(h, dt):
            raise ConfigurationError(f"h={h} is not on the step grid dt={dt}")
        offsets.append(k)
    start = round(t_fixed / dt)
    if abs(start * dt - t_fixed) > 1e-9 * max(1.0, t_fixed):
        raise ConfigurationError(f"t={t_fixed} is not on the step grid dt={dt}")
    horizon = (start + max(offsets)) * dt
    c = cfg.replace(T=horizon, delta=dt, mc_samples=M)
    check_config(c, system.coeffs)
    chunks = _chunks(M, cfg.chunk_size)

    def work(chunk):
        paths = sample_paths(c, system.coeffs, system.noise, chunk)
        res = run_slow_fast_batch(system.x0, system.y0, system.coeffs, system.noise, c, paths)
        base = res.x[:, start]
        inc = np.stack([l2_norm(res.x[:, start + k] - base) ** 2 for k in offsets], axis=1)
        return inc, res.ok

    parts = _map(work, chunks, threads)
    inc = np.concatenate([r[0] for r in parts])
    ok = np.concatenate([r[1] for r in parts])
    stats = [_mean_se(inc[ok, j]) for j in range(len(offsets))]
    means = [s[0] for s in stats]
    return SlopeReport(list(map(float, h_list)), means, [s[1] for s in stats],
                       loglog_slope(h_list, means))


def run_auxiliary_gap(cfg: SimulationConfig, system: System, delta_list: Sequence[float],
                      M: int | None = None, threads: int = 1) -> SlopeReport:
    """``E||Y_T - Yhat_T||^2`` with shared fast noise, against the breakpoint spacing."""
    M = cfg.mc_samples if M is None else M
    cfgs = [cfg.replace(delta=d, mc_samples=M) for d in delta_list]
    for c in cfgs:
        check_config(c, system.coeffs)
        if c.n_steps % c.delta_steps:
            raise ConfigurationError(f"delta={c.delta} does not divide T={c.T}")
    chunks = _chunks(M, cfg.chunk_size)

    def work(chunk):
        paths = sample_paths(cfgs[0], system.coeffs, system.noise, chunk)
        res = run_slow_fast_batch(system.x0, system.y0, system.coeffs, system.noise, cfgs[0],
                                  paths, record_y=True)
        gaps, ok = [], res.ok.copy()
        for c in cfgs:
            aux = run_auxiliary_batch(res.x, res.y, system.coeffs, system.noise, c, paths)
            gaps.append(l2_norm(res.y[:, -1] - aux.x[:, -1]) ** 2)
            ok &= aux.ok
        return np.stack(gaps, axis=1), ok

    parts = _map(work, chunks, threads)
    gaps = np.concatenate([r[0] for r in parts])
    ok = np.concatenate([r[1] for r in parts])
    stats = [_mean_se(gaps[ok, j]) for j in range(len(cfgs))]
    means = [s[0] for s in stats]
    return SlopeReport(list(map(float, delta_list)), means, [s[1] for s in stats],
                       loglog_slope(delta_list, means))
