"""Built-in example systems.

``burgers_ou_levy`` is the forced Burgers equation whose forcing contains a
fast Ornstein-Uhlenbeck component::

    du = [u_xx + 0.5 (u^2)_x - (u + v)] dt + dW1 + int u z N~1(dt, dz)
    dv = -(1/eps) v dt + eps^{-1/2} dW2
    u(0) = 2, v(0) = 1, Dirichlet boundary conditions, t in [0, 1]

with averaged drift ``fbar(u) = -u``.  The noise law is not pinned down by
the model, so the defaults here are ``alpha_k = k^-2`` for both Q-Wiener
processes and compound-Poisson jumps at rate 1 with Uniform(-1, 1) marks.

``burgers_ou_levy_coupled`` feeds the slow state into the fast drift,
``f2(u, v) = -v + kappa u``; its averaged drift is ``-(1 + kappa) u``.  In the
uncoupled example the fast process ignores the slow one, which makes the
frozen-input auxiliary process coincide with the fast process exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .integrators import SystemCoefficients, SystemNoise
from .noise import NoiseModel, UniformMarks
from .spectral import BasisSpec, build_basis


@dataclass
class ExampleSystem:
    name: str
    coeffs: SystemCoefficients
    noise: SystemNoise
    x0: np.ndarray
    y0: np.ndarray
    fbar: Callable
    basis: BasisSpec


def _ou_levy(n_modes: int, grid_size: int | None, levy_rate: float, q_decay: float,
             coupling: float, name: str) -> ExampleSystem:
    basis = build_basis(n_modes, grid_size)
    marks = UniformMarks(-1.0, 1.0)
    slow = NoiseModel.power_law(n_modes, q_decay, levy_rate=levy_rate, marks=marks)
    fast = NoiseModel.power_law(n_modes, q_decay, levy_rate=0.0, marks=marks)

    def f1(x, y):
        return -(x + y)

    def h1(x, z):
        return x * z

    def fbar(x):
        return -(1.0 + coupling) * x

    if coupling == 0.0:
        def f2(x, y):
            return -y
        forcing = None
    else:
        def f2(x, y):
            return -y + coupling * x

        def forcing(x):
            return coupling * x

    coeffs = SystemCoefficients(
        f1=f1, f2=f2, h1=h1, h2=None,
        L_f1=1.0, L_f2=max(1.0, abs(coupling)),
        # int |z|^gamma mu(dz) is largest at gamma = 1: rate * E|z| = rate / 2
        L_h1=levy_rate * 0.5, L_h2=0.0,
        c=0.0, analytic_fbar=fbar, fast_rate=1.0, fast_forcing=forcing,
    )
    return ExampleSystem(name, coeffs, SystemNoise(slow, fast),
                         basis.constant(2.0), basis.constant(1.0), fbar, basis)


def burgers_ou_levy(n_modes: int = 32, grid_size: int | None = None, levy_rate: float = 1.0,
                    q_decay: float = 2.0) -> ExampleSystem:
    return _ou_levy(n_modes, grid_size, levy_rate, q_decay, 0.0, "burgers_ou_levy")


def burgers_ou_levy_coupled(n_modes: int = 32, grid_size: int | None = None,
                            levy_rate: float = 1.0, q_decay: float = 2.0,
                            coupling: float = 1.0) -> ExampleSystem:
    return _ou_levy(n_modes, grid_size, levy_rate, q_decay, coupling, "burgers_ou_levy_coupled")


EXAMPLES = {
    "burgers_ou_levy": burgers_ou_levy,
    "burgers_ou_levy_coupled": burgers_ou_levy_coupled,
}


def get_example(name: str, **kwargs) -> ExampleSystem:
    try:
        factory = EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; known: {sorted(EXAMPLES)}") from None
    return factory(**kwargs)
