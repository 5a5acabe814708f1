"""Run configuration: TOML files plus inline overrides, resolved to concrete objects.

A config file is flat TOML with one table per concern::

    example = "burgers_ou_levy"

    [simulation]
    epsilon = 0.1
    dt = 1e-4
    T = 1.0
    n_modes = 32

    [experiments]
    epsilons = [0.1, 0.01, 0.001]
    p = [3, 4]

Every key has a default (see ``DEFAULTS``); the resolved dictionary with all
defaults filled in is what gets hashed and recorded in the run manifest.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .averaging import ValidationReport, validate_assumptions
from .experiments import System
from .integrators import SimulationConfig, SystemNoise, check_config
from .noise import NoiseModel, UniformMarks
from .registry import EXAMPLES, get_example
from .spectral import ConfigurationError

DEFAULTS: dict = {
    "example": "burgers_ou_levy",
    "simulation": {
        "epsilon": 0.1,
        "dt": 1e-4,
        "T": 1.0,
        "n_modes": 32,
        "grid_size": 128,
        "delta": None,
        "seed": 2024,
        "mc_samples": 200,
        "p": [3.0, 4.0],
        "exact_fast": True,
        "blowup_threshold": 1e8,
        "chunk_size": 20,
    },
    "noise": {
        "q_decay": 2.0,
        "levy_rate": 1.0,
        "mark_low": -1.0,
        "mark_high": 1.0,
        "a4_beta": 2.0,
        "a4_rho": 3.0,
    },
    "system": {
        "coupling": 1.0,
    },
    "initial": {
        "x0": 2.0,
        "y0": 1.0,
        "x0_modes": None,
        "y0_modes": None,
    },
    "experiments": {
        "epsilons": [0.1, 0.01, 0.001],
        "q": [1.0],
        "h": [1e-3, 5e-4, 2.5e-4],
        "increment_dt": 5e-5,
        "t_fixed": 0.5,
        "deltas": [0.1, 0.05, 0.025],
        "aux_example": "burgers_ou_levy_coupled",
        "aux_epsilon": 0.01,
    },
    "drift": {
        "burn_in": 10.0,
        "horizon": 200.0,
        "dt": 0.01,
        "n_batches": 20,
    },
}


class AssumptionError(ConfigurationError):
    def __init__(self, report: ValidationReport):
        self.report = report
        names = ", ".join(f"({r.clause}) {r.detail}" for r in report.failures())
        super().__init__(f"assumption check failed: {names}")


def load_toml(path) -> dict:
    text = Path(path).read_text()
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # message carries "(at line L, column C)"
        raise ConfigurationError(f"{path}: {exc}") from None


def parse_override(item: str) -> tuple[str, object]:
    """``section.key=value`` with a TOML-literal value."""
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    try:
        value = tomli.loads(f"v = {raw.strip()}")["v"]
    except tomli.TOMLDecodeError:
        value = raw.strip()
    return key.strip(), value


def _merge(base: dict, updates: dict, where: str = "") -> dict:
    for key, value in updates.items():
        if key not in base:
            raise ConfigurationError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"{where}{key} must be a table")
            _merge(base[key], value, f"{where}{key}.")
        else:
            base[key] = value
    return base


def _set_dotted(tree: dict, key: str, value) -> None:
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ResolvedConfig:
    raw: dict
    cfg: SimulationConfig
    system: System
    example: str
    validation: ValidationReport
    config_hash: str

    @property
    def experiments(self) -> dict:
        return self.raw["experiments"]

    @property
    def drift(self) -> dict:
        return self.raw["drift"]

    def build_system(self, example: str, **sim_changes) -> tuple[SimulationConfig, System]:
        """Same settings with another registered example (used by the auxiliary diagnostic)."""
        return self.cfg.replace(**sim_changes), _build_system(self.raw, example)


def _initial(raw_init: dict, key: str, basis) -> np.ndarray:
    modes = raw_init[f"{key}_modes"]
    if modes is not None:
        out = np.zeros(basis.n_modes)
        modes = np.asarray(modes, dtype=float)
        if modes.size > basis.n_modes:
            raise ConfigurationError(f"initial.{key}_modes has more than {basis.n_modes} entries")
        out[: modes.size] = modes
        return out
    return basis.constant(float(raw_init[key]))


def _build_system(raw: dict, example: str) -> System:
    sim, nz = raw["simulation"], raw["noise"]
    kwargs = dict(n_modes=int(sim["n_modes"]), grid_size=sim["grid_size"],
                  levy_rate=float(nz["levy_rate"]), q_decay=float(nz["q_decay"]))
    if example == "burgers_ou_levy_coupled":
        kwargs["coupling"] = float(raw["system"]["coupling"])
    ex = get_example(example, **kwargs)
    marks = UniformMarks(float(nz["mark_low"]), float(nz["mark_high"]))
    for model in (ex.noise.slow, ex.noise.fast):
        model.marks = marks
        model.a4_beta = float(nz["a4_beta"])
        model.a4_rho = float(nz["a4_rho"])
    # L_h1 depends on the mark law: int |z| mu(dz) = rate * E|z|
    ex.coeffs.L_h1 = ex.noise.slow.levy_rate * marks.expect(abs)
    x0 = _initial(raw["initial"], "x0", ex.basis)
    y0 = _initial(raw["initial"], "y0", ex.basis)
    return System(ex.coeffs, SystemNoise(ex.noise.slow, ex.noise.fast), x0, y0, ex.fbar)


def resolve(raw_updates: dict | None = None) -> dict:
    raw = copy.deepcopy(DEFAULTS)
    if raw_updates:
        _merge(raw, raw_updates)
    return raw


def parse_config(path=None, overrides: dict | list | None = None,
                 force: bool = False) -> ResolvedConfig:
    """Load ``path`` (optional), apply overrides, fill defaults and validate.

    ``overrides`` is a nested dict or a list of ``"section.key=value"``
    strings.  Assumption failures raise :class:`AssumptionError` unless
    ``force`` is set.
    """
    updates: dict = load_toml(path) if path is not None else {}
    if isinstance(overrides, (list, tuple)):
        for item in overrides:
            _set_dotted(updates, *parse_override(item))
    elif overrides:
        for key, value in overrides.items():
            if isinstance(value, dict):
                updates.setdefault(key, {}).update(value)
            else:
                _set_dotted(updates, key, value)
    raw = resolve(updates)
    example = raw["example"]
    if example not in EXAMPLES:
        raise ConfigurationError(f"unknown example {example!r}; known: {sorted(EXAMPLES)}")

    sim = raw["simulation"]
    cfg = SimulationConfig(
        epsilon=float(sim["epsilon"]), dt=float(sim["dt"]), T=float(sim["T"]),
        n_modes=int(sim["n_modes"]), grid_size=sim["grid_size"],
        delta=None if sim["delta"] is None else float(sim["delta"]),
        mc_samples=int(sim["mc_samples"]), p_exponents=tuple(sim["p"]),
        seed=int(sim["seed"]), exact_fast=bool(sim["exact_fast"]),
        blowup_threshold=float(sim["blowup_threshold"]), chunk_size=int(sim["chunk_size"]),
    )
    sim["delta"] = cfg.delta  # materialize the default
    for eps in raw["experiments"]["epsilons"]:
        if not 0 < eps < 1:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {eps}")
    system = _build_system(raw, example)
    check_config(cfg, system.coeffs)
    report = validate_assumptions(system.coeffs, system.noise, cfg.basis,
                                  rng=np.random.default_rng(cfg.seed))
    if not report.passed and not force:
        raise AssumptionError(report)
    raw["version"] = __version__
    return ResolvedConfig(raw, cfg, system, example, report, config_hash(raw))
