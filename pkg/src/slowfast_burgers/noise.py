"""Q-Wiener increments and compensated compound-Poisson jumps.

Noise is drawn per Monte Carlo path from independent substreams derived from
``(master_seed, path_index, stream)``, so a path's realization does not depend
on how paths are batched or scheduled.  Draws are stored as standard normals
and jump marks in a :class:`NoisePath`; the physical scalings are applied by
the integrators, which lets one path drive the slow-fast system, the averaged
equation and the auxiliary process identically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .spectral import ConfigurationError, SpectralField

# stream identifiers for SeedSequence spawn keys
SLOW_GAUSS, SLOW_JUMP, FAST_GAUSS, FAST_JUMP = range(4)


@dataclass(frozen=True)
class UniformMarks:
    """Uniform jump-mark law on ``(low, high)`` inside ``(-1, 1)``."""

    low: float = -1.0
    high: float = 1.0
    quadrature_nodes: int = 8

    def __post_init__(self):
        if not -1.0 <= self.low < self.high <= 1.0:
            raise ConfigurationError(
                f"mark support ({self.low}, {self.high}) must lie in (-1, 1)")

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        z = rng.uniform(self.low, self.high, size)
        # open interval: uniform() may return `low` exactly
        return np.where(np.abs(z) >= 1.0, 0.0, z)

    @cached_property
    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        # split at z = 0 so integrands like |h(x, z)| are smooth on each piece
        x, w = np.polynomial.legendre.leggauss(self.quadrature_nodes)
        cuts = [self.low, 0.0, self.high] if self.low < 0.0 < self.high else [self.low, self.high]
        width = self.high - self.low
        nodes, weights = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            nodes.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            weights.append(0.5 * (b - a) * w / width)
        return np.concatenate(nodes), np.concatenate(weights)

    def expect(self, func):
        """``E_z[func(z)]`` by Gauss-Legendre quadrature."""
        nodes, weights = self.nodes_weights
        total = weights[0] * func(nodes[0])
        for z, w in zip(nodes[1:], weights[1:]):
            total = total + w * func(z)
        return total


@dataclass
class NoiseModel:
    q_coeffs: np.ndarray
    levy_rate: float = 1.0
    marks: UniformMarks = field(default_factory=UniformMarks)
    a4_beta: float = 2.0
    a4_rho: float = 3.0

    def __post_init__(self):
        self.q_coeffs = np.asarray(self.q_coeffs, dtype=float)
        if not np.all(np.isfinite(self.q_coeffs)) or np.any(self.q_coeffs < 0):
            raise ConfigurationError("q_coeffs must be finite and non-negative")
        if not np.isfinite(self.levy_rate) or self.levy_rate < 0:
            raise ConfigurationError(f"levy_rate must be finite and >= 0, got {self.levy_rate}")

    @property
    def mark_mean(self) -> float:
        return self.marks.mean

    @property
    def n_modes(self) -> int:
        return self.q_coeffs.shape[0]

    @classmethod
    def power_law(cls, n_modes: int, decay: float = 2.0, **kwargs) -> "NoiseModel":
        """``alpha_k = k**(-decay)``."""
        k = np.arange(1, n_modes + 1, dtype=float)
        return cls(q_coeffs=k**-decay, **kwargs)


def path_rng(seed: int, path_index: int, stream: int) -> np.random.Generator:
    """Independent generator for one (path, stream) pair."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path_index), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_qwiener_increment(model: NoiseModel, dt: float, rng: np.random.Generator,
                             size=()) -> SpectralField:
    """Coefficients ``sqrt(alpha_k * dt) * xi_k`` of one Q-Wiener increment."""
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    size = (size,) if np.isscalar(size) else tuple(size)
    xi = rng.standard_normal((*size, model.n_modes))
    return np.sqrt(model.q_coeffs * dt) * xi


def sample_jump_events(model: NoiseModel, dt: float, rng: np.random.Generator,
                       rate_scale: float = 1.0) -> np.ndarray:
    """Marks of the jumps falling in one step of length ``dt``."""
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    count = rng.poisson(model.levy_rate * rate_scale * dt)
    return model.marks.sample(rng, count)


def compensator(state: SpectralField, h, model: NoiseModel, dt: float,
                rate_scale: float = 1.0) -> SpectralField:
    """``rate * dt * E_z[h(state, z)]``."""
    rate = model.levy_rate * rate_scale
    if rate == 0.0:
        return np.zeros_like(state)
    return rate * dt * model.marks.expect(lambda z: h(state, z))


def compensated_jump_contribution(state: SpectralField, h, marks, model: NoiseModel,
                                  dt: float, rate_scale: float = 1.0) -> SpectralField:
    """``sum_marks h(state, z) - rate * dt * E_z[h(state, z)]``."""
    out = -compensator(state, h, model, dt, rate_scale)
    for z in np.atleast_1d(marks):
        out = out + h(state, float(z))
    return out


@dataclass
class JumpRecord:
    """Jump events of one stream: parallel arrays of step index and mark."""

    steps: np.ndarray
    marks: np.ndarray

    @classmethod
    def empty(cls) -> "JumpRecord":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0))

    def by_step(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for s, z in zip(self.steps.tolist(), self.marks.tolist()):
            out.setdefault(s, []).append(z)
        return out


def sample_jump_record(model: NoiseModel, dt: float, n_steps: int,
                       rng: np.random.Generator, rate_scale: float = 1.0) -> JumpRecord:
    rate = model.levy_rate * rate_scale * dt
    if rate == 0.0 or n_steps == 0:
        return JumpRecord.empty()
    counts = rng.poisson(rate, n_steps)
    steps = np.repeat(np.arange(n_steps, dtype=np.int64), counts)
    return JumpRecord(steps, model.marks.sample(rng, steps.size))


@dataclass
class NoisePath:
    """Recorded noise for one path over ``n_steps`` steps.

    ``slow_gauss`` / ``fast_gauss`` hold standard normals of shape
    ``(n_steps, n_modes)``; physical increments are ``sqrt(alpha_k dt) * xi``.
    """

    slow_gauss: np.ndarray
    slow_jumps: JumpRecord
    fast_gauss: np.ndarray
    fast_jumps: JumpRecord
    seed: int | None = None
    path_index: int | None = None

    @property
    def n_steps(self) -> int:
        return self.slow_gauss.shape[0]

    @property
    def n_modes(self) -> int:
        return self.slow_gauss.shape[1]

    @classmethod
    def zeros(cls, n_steps: int, n_modes: int) -> "NoisePath":
        return cls(np.zeros((n_steps, n_modes)), JumpRecord.empty(),
                   np.zeros((n_steps, n_modes)), JumpRecord.empty())

    @classmethod
    def sample(cls, seed: int, path_index: int, n_steps: int, dt: float,
               slow: NoiseModel, fast: NoiseModel, epsilon: float,
               fast_jumps: bool = True, slow_jumps: bool = True) -> "NoisePath":
        """Draw every stream for one path.

        Fast jumps arrive at rate ``levy_rate / epsilon``.  Streams whose jump
        coefficient is absent can be skipped; the other streams are unaffected
        since each has its own generator.
        """
        n = slow.n_modes
        slow_gauss = path_rng(seed, path_index, SLOW_GAUSS).standard_normal((n_steps, n))
        fast_gauss = path_rng(seed, path_index, FAST_GAUSS).standard_normal((n_steps, n))
        sj = (sample_jump_record(slow, dt, n_steps, path_rng(seed, path_index, SLOW_JUMP))
              if slow_jumps else JumpRecord.empty())
        fj = (sample_jump_record(fast, dt, n_steps, path_rng(seed, path_index, FAST_JUMP),
                                 rate_scale=1.0 / epsilon)
              if fast_jumps else JumpRecord.empty())
        return cls(slow_gauss, sj, fast_gauss, fj, seed, path_index)

    def truncated(self, n_steps: int) -> "NoisePath":
        def cut(rec: JumpRecord) -> JumpRecord:
            keep = rec.steps < n_steps
            return JumpRecord(rec.steps[keep], rec.marks[keep])

        return NoisePath(self.slow_gauss[:n_steps], cut(self.slow_jumps),
                         self.fast_gauss[:n_steps], cut(self.fast_jumps),
                         self.seed, self.path_index)

    def dump_csv(self, path, config_hash: str = "") -> None:
        """Debug dump: one row per step with both Gaussian blocks, then jump rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            n = self.n_modes
            w.writerow(["kind", "step", "config_hash"] + [f"slow_xi{k}" for k in range(1, n + 1)]
                       + [f"fast_xi{k}" for k in range(1, n + 1)])
            for i in range(self.n_steps):
                w.writerow(["gauss", i, config_hash] + [repr(v) for v in self.slow_gauss[i]]
                           + [repr(v) for v in self.fast_gauss[i]])
            for kind, rec in (("slow_jump", self.slow_jumps), ("fast_jump", self.fast_jumps)):
                for s, z in zip(rec.steps.tolist(), rec.marks.tolist()):
                    w.writerow([kind, s, config_hash, repr(z)])
