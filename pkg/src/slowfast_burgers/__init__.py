"""Slow-fast stochastic Burgers system with Lévy noise: simulation and averaging."""

__version__ = "0.1.0"

from .spectral import (BasisSpec, ConfigurationError, build_basis, burgers_nonlinearity,
                       h_alpha_norm, semigroup_apply, trilinear_b)
from .noise import NoiseModel, NoisePath, UniformMarks
from .integrators import (BlowUpError, SimulationConfig, SlowFastState, SystemCoefficients,
                          SystemNoise, simulate_auxiliary, simulate_averaged, simulate_frozen,
                          simulate_slow_fast, step_slow_fast)
from .averaging import analytic_averaged_drift, estimate_averaged_drift, validate_assumptions
from .experiments import (System, run_auxiliary_gap, run_convergence_sweep,
                          run_increment_diagnostic, run_moment_diagnostics, sup_error_path)
from .registry import get_example

__all__ = [
    "BasisSpec", "BlowUpError", "ConfigurationError", "NoiseModel", "NoisePath",
    "SimulationConfig", "SlowFastState", "System", "SystemCoefficients", "SystemNoise",
    "UniformMarks", "analytic_averaged_drift", "build_basis", "burgers_nonlinearity",
    "estimate_averaged_drift", "get_example", "h_alpha_norm", "run_auxiliary_gap",
    "run_convergence_sweep", "run_increment_diagnostic", "run_moment_diagnostics",
    "semigroup_apply", "simulate_auxiliary", "simulate_averaged", "simulate_frozen",
    "simulate_slow_fast", "step_slow_fast", "sup_error_path", "trilinear_b",
    "validate_assumptions",
]
