"""
Initial velocity fields: Taylor-Green vortices and random band-limited data.
"""

import math
from typing import Optional

import numpy as np

from .exceptions import DomainError
from .spectral import SpectralField, TorusGrid, dealias, l2_norm, leray_project, transform_forward


def taylor_green(grid: TorusGrid, amplitude: float = 1.0) -> SpectralField:
    """
    Taylor-Green vortex.

    2D: (sin x cos y, -cos x sin y); 3D: (sin x cos y cos z, -cos x sin y cos z, 0).
    """
    if grid.dim == 2:
        x, y = grid.coordinates()
        samples = [np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)]
    elif grid.dim == 3:
        x, y, z = grid.coordinates()
        samples = [np.sin(x) * np.cos(y) * np.cos(z),
                   -np.cos(x) * np.sin(y) * np.cos(z),
                   np.zeros(grid.shape)]
    else:
        raise DomainError(f"Taylor-Green data needs dim 2 or 3, got {grid.dim}")
    return transform_forward(grid, amplitude * np.array(samples), div_free=True)


def random_bandlimited(grid: TorusGrid, seed: int, band: int = 4,
                       amplitude: float = 0.1) -> SpectralField:
    """
    Random real divergence-free field with modes 0 < |k_j| <= band.

    Args:
        grid: Target grid (dim 2 or 3)
        seed: Seed for numpy's default_rng
        band: Largest wavenumber per axis; must survive the 2/3 mask
        amplitude: Root-mean-square velocity of the result

    Returns:
        Projected, dealiased, mean-free field
    """
    if grid.dim not in (2, 3):
        raise DomainError(f"random velocity data needs dim 2 or 3, got {grid.dim}")
    if int(band) != band or band < 1 or band >= grid.points_per_axis / 3.0:
        raise DomainError(f"band must be a positive integer below M/3, got {band}")
    rng = np.random.default_rng(seed)
    shape = (grid.dim,) + grid.shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    inside = np.all(np.abs(grid.wavenumbers) <= band, axis=0)
    inside[(0,) * grid.dim] = False
    raw = raw * inside
    axes = grid.axes
    mirrored = np.roll(np.flip(raw, axis=axes), 1, axis=axes)
    symmetric = 0.5 * (raw + np.conj(mirrored))

    field = dealias(leray_project(SpectralField(grid, symmetric)))
    norm = l2_norm(field)
    if norm == 0.0:
        raise DomainError("random field vanished after projection; widen the band")
    return field * (amplitude * math.sqrt(grid.volume) / norm)


def perturbed_taylor_green(grid: TorusGrid, amplitude: float = 1.0,
                           perturbation: float = 0.05, seed: int = 0,
                           band: Optional[int] = None) -> SpectralField:
    """
    Taylor-Green plus a small random band-limited field.

    Pure Taylor-Green has F(u) = 0; the perturbation switches the nonlinearity on.
    """
    if band is None:
        band = max(1, min(4, math.ceil(grid.points_per_axis / 3.0) - 1))
    base = taylor_green(grid, amplitude)
    if perturbation == 0.0:
        return base
    return base + random_bandlimited(grid, seed, band, perturbation)
