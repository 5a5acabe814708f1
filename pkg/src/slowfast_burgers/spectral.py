"""Dirichlet sine eigenbasis on (0, 1).

A field is stored as the array of its coefficients in the orthonormal basis
``e_k(xi) = sqrt(2) sin(k pi xi)``, ``k = 1..N``.  The last array axis indexes
modes; any leading axes are batch axes (Monte Carlo paths, time steps) and
every function here broadcasts over them.

Physical values live on the uniform grid ``xi_j = j / G`` with ``G`` the
grid size.  Products are formed on that grid and projected back with type-I
sine/cosine transforms, which is exact for quadratic terms once
``G >= 2N + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

SpectralField = np.ndarray
"""Coefficient array of shape ``(..., n_modes)``."""


class ConfigurationError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass(frozen=True, eq=False)
class BasisSpec:
    n_modes: int
    grid_size: int
    wavenumbers: np.ndarray  # k * pi
    eigenvalues: np.ndarray  # (k * pi) ** 2
    grid: np.ndarray  # interior collocation points j / G, j = 1..G-1
    weights: np.ndarray  # trapezoid weights on the interior points

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])

    def eigenfunctions(self, xi=None) -> np.ndarray:
        """Values of ``e_k`` at ``xi`` (default: the grid), shape ``(len(xi), N)``."""
        xi = self.grid if xi is None else np.asarray(xi, dtype=float)
        return np.sqrt(2.0) * np.sin(np.outer(xi, self.wavenumbers))

    def gram(self) -> np.ndarray:
        e = self.eigenfunctions()
        return (e * self.weights[:, None]).T @ e

    def zeros(self, *batch: int) -> SpectralField:
        return np.zeros((*batch, self.n_modes))

    def to_physical(self, coeffs: SpectralField) -> np.ndarray:
        """Evaluate a field on the interior grid points."""
        coeffs = np.asarray(coeffs, dtype=float)
        padded = _pad(coeffs, self.grid_size - 1)
        return sfft.dst(padded, type=1, axis=-1) / np.sqrt(2.0)

    def to_spectral(self, values: np.ndarray) -> SpectralField:
        """Project interior grid values onto the first ``n_modes`` sine modes."""
        values = np.asarray(values, dtype=float)
        full = sfft.dst(values, type=1, axis=-1) / (np.sqrt(2.0) * self.grid_size)
        return full[..., : self.n_modes]

    def project(self, func) -> SpectralField:
        """Coefficients of a pointwise function of ``xi`` (e.g. constant initial data).

        Uses the grid quadrature, so the result is the discrete projection;
        constants pick up the usual Gibbs mismatch at the boundary.
        """
        return self.to_spectral(np.broadcast_to(func(self.grid), self.grid.shape))

    def constant(self, value: float) -> SpectralField:
        """Exact L2 projection of the constant ``value`` onto the basis."""
        k = np.arange(1, self.n_modes + 1)
        return value * np.sqrt(2.0) * (1.0 - (-1.0) ** k) / (k * np.pi)


def _pad(coeffs: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros((*coeffs.shape[:-1], length))
    out[..., : coeffs.shape[-1]] = coeffs
    return out


@lru_cache(maxsize=32)
def build_basis(n_modes: int, grid_size: int | None = None) -> BasisSpec:
    """Build (and cache) the sine basis with ``n_modes`` modes.

    ``grid_size`` is the number of grid intervals on [0, 1]; it must leave
    dealiasing headroom, ``grid_size >= 2 * n_modes + 1``.  The default is
    ``4 * n_modes``.
    """
    if int(n_modes) != n_modes or n_modes < 1:
        raise ConfigurationError(f"n_modes must be a positive integer, got {n_modes}")
    n_modes = int(n_modes)
    if grid_size is None:
        grid_size = 4 * n_modes
    if int(grid_size) != grid_size or grid_size < 2 * n_modes + 1:
        raise ConfigurationError(
            f"grid_size={grid_size} too small for {n_modes} modes "
            f"(need at least {2 * n_modes + 1})"
        )
    grid_size = int(grid_size)
    k = np.arange(1, n_modes + 1, dtype=float)
    wavenumbers = k * np.pi
    grid = np.arange(1, grid_size) / grid_size
    weights = np.full(grid_size - 1, 1.0 / grid_size)
    for arr in (wavenumbers, grid, weights):
        arr.setflags(write=False)
    eigenvalues = wavenumbers**2
    eigenvalues.setflags(write=False)
    return BasisSpec(n_modes, grid_size, wavenumbers, eigenvalues, grid, weights)


def semigroup_factors(basis: BasisSpec, t: float, diffusion: float = 1.0) -> np.ndarray:
    """Per-mode multipliers ``exp(-diffusion * lambda_k * t)``."""
    if not np.isfinite(t) or t < 0:
        raise ConfigurationError(f"semigroup time must be finite and >= 0, got {t}")
    if diffusion < 0:
        raise ConfigurationError(f"diffusion must be >= 0, got {diffusion}")
    return np.exp(-diffusion * basis.eigenvalues * t)


def semigroup_apply(field: SpectralField, t: float, diffusion: float = 1.0,
                    basis: BasisSpec | None = None) -> SpectralField:
    """Apply ``exp(t * diffusion * A)`` mode by mode."""
    field = np.asarray(field, dtype=float)
    if basis is None:
        basis = build_basis(field.shape[-1], 2 * field.shape[-1] + 1)
    return semigroup_factors(basis, t, diffusion) * field


def derivative_on_full_grid(coeffs: SpectralField, basis: BasisSpec) -> np.ndarray:
    """Values of ``d/dxi`` of the field at ``xi_j = j / G``, ``j = 0..G``."""
    coeffs = np.asarray(coeffs, dtype=float)
    b = np.zeros((*coeffs.shape[:-1], basis.grid_size + 1))
    b[..., 1 : basis.n_modes + 1] = coeffs * np.sqrt(2.0) * basis.wavenumbers
    # the k = 0 and k = G slots are empty, so DCT-I reduces to 2 * sum_k b_k cos
    return 0.5 * sfft.dct(b, type=1, axis=-1)


def burgers_nonlinearity(field: SpectralField, basis: BasisSpec) -> SpectralField:
    """Galerkin projection of ``0.5 * d/dxi (X**2)`` onto the basis.

    ``X**2`` is even on the odd extension, so it is expanded in cosines with a
    DCT-I; differentiating ``cos(k pi xi)`` gives ``-k pi sin(k pi xi)``.
    """
    u = basis.to_physical(field)
    sq = np.zeros((*u.shape[:-1], basis.grid_size + 1))
    sq[..., 1:-1] = u * u
    cos_coeffs = sfft.dct(sq, type=1, axis=-1)[..., 1 : basis.n_modes + 1] / basis.grid_size
    return -0.5 * basis.wavenumbers * cos_coeffs / np.sqrt(2.0)


def trilinear_b(x: SpectralField, y: SpectralField, z: SpectralField,
                basis: BasisSpec) -> np.ndarray:
    """Quadrature value of ``int_0^1 x * y' * z dxi``.

    The integrand has cosine content up to mode ``3N`` which the trapezoid
    rule integrates exactly for ``G > 3N / 2``.
    """
    xv = basis.to_physical(x)
    zv = basis.to_physical(z)
    dy = derivative_on_full_grid(y, basis)[..., 1:-1]
    return np.sum(xv * dy * zv * basis.weights, axis=-1)


def inner(a: SpectralField, b: SpectralField) -> np.ndarray:
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def l2_norm(field: SpectralField) -> np.ndarray:
    return np.sqrt(np.sum(np.square(field), axis=-1))


def h_alpha_norm(field: SpectralField, alpha: float, basis: BasisSpec) -> np.ndarray:
    """``(sum_k lambda_k**alpha * c_k**2) ** 0.5``; ``alpha = 0`` is the L2 norm."""
    if not np.isfinite(alpha):
        raise ConfigurationError(f"alpha must be finite, got {alpha}")
    field = np.asarray(field, dtype=float)
    return np.sqrt(np.sum(basis.eigenvalues**alpha * field**2, axis=-1))


def pointwise(func, basis: BasisSpec):
    """Lift a pointwise map ``func(u_values, *others)`` to coefficient space.

    Each argument is synthesized on the grid, ``func`` is applied there and
    the result projected back.  Extra non-field arguments (jump marks) are
    passed through unchanged.
    """

    def lifted(*args):
        vals = [basis.to_physical(a) if isinstance(a, np.ndarray) and a.ndim >= 1
                and a.shape[-1] == basis.n_modes else a for a in args]
        return basis.to_spectral(func(*vals))

    return lifted
