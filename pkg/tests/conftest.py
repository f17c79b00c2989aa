"""Pytest configuration and fixtures for fracns tests."""

import math
import tempfile
from pathlib import Path

import mpmath
import numpy as np
import pytest

from fracns.initial_data import perturbed_taylor_green, random_bandlimited, taylor_green
from fracns.spectral import SpectralField, TorusGrid, dealias, transform_forward
from fracns.utils import TimeGrid


@pytest.fixture(scope="session")
def grid16():
    """Small 2D grid used by most solver tests."""
    return TorusGrid(2, 16)


@pytest.fixture(scope="session")
def grid32():
    """2D grid matching the reference experiments."""
    return TorusGrid(2, 32)


@pytest.fixture(scope="session")
def grid3d():
    """Coarse 3D grid."""
    return TorusGrid(3, 8)


@pytest.fixture(scope="session")
def short_time():
    """Time grid on [0, 0.5] with 16 steps."""
    return TimeGrid(0.5, 16)


@pytest.fixture(scope="session")
def tg16(grid16):
    """Taylor-Green vortex on the 16-point grid."""
    return taylor_green(grid16)


@pytest.fixture(scope="session")
def perturbed16(grid16):
    """Taylor-Green plus a small random perturbation (nonlinearity active)."""
    return perturbed_taylor_green(grid16, amplitude=1.0, perturbation=0.1, seed=3, band=2)


@pytest.fixture(scope="session")
def random16(grid16):
    """Random divergence-free band-limited field."""
    return random_bandlimited(grid16, seed=11, band=3, amplitude=0.5)


@pytest.fixture
def temp_output_dir():
    """Create a temporary directory for test outputs."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


class TestHelpers:
    """Helper methods and extended-precision oracles for testing."""

    @staticmethod
    def mittag_leffler_reference(alpha, beta, z, dps=80, max_terms=4000):
        """E_{alpha,beta}(z) by the Taylor series in mpmath arithmetic."""
        with mpmath.workdps(dps):
            a, b, x = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(z)
            total = mpmath.mpf(0)
            power = mpmath.mpf(1)
            for k in range(max_terms):
                term = power * mpmath.rgamma(a * k + b)
                total += term
                if k > 10 and abs(term) < mpmath.mpf(10) ** (-40):
                    break
                power *= x
            return float(total)

    @staticmethod
    def mainardi_reference(alpha, theta, dps=60, max_terms=600):
        """M_alpha(theta) = sum (-theta)^n / (n! Gamma(1 - alpha - alpha n)) in mpmath."""
        with mpmath.workdps(dps):
            a, t = mpmath.mpf(alpha), mpmath.mpf(theta)
            total = mpmath.mpf(0)
            for n in range(max_terms):
                term = (-t) ** n / mpmath.factorial(n) * mpmath.rgamma(1 - a - a * n)
                total += term
                if n > 10 and abs(term) < mpmath.mpf(10) ** (-30):
                    break
            return float(total)

    @staticmethod
    def random_real_field(grid, seed, ncomp=None, dealiased=True):
        """Transform of random real samples (not divergence-free)."""
        rng = np.random.default_rng(seed)
        ncomp = grid.dim if ncomp is None else ncomp
        field = transform_forward(grid, rng.standard_normal((ncomp,) + grid.shape))
        return dealias(field) if dealiased else field

    @staticmethod
    def single_mode_field(grid, wavenumber=1):
        """Divergence-free field (0, cos(m x_1)) on a 2D grid."""
        x = grid.coordinates()[0]
        samples = np.zeros((grid.dim,) + grid.shape)
        samples[1] = np.cos(wavenumber * x)
        return transform_forward(grid, samples, div_free=True)

    @staticmethod
    def max_abs_difference(a: SpectralField, b: SpectralField) -> float:
        """Largest coefficient difference of two fields."""
        return float(np.max(np.abs(a.coefficients - b.coefficients)))

    @staticmethod
    def observed_order(errors, ratio=2.0):
        """Convergence orders log_ratio(e_k / e_{k+1}) for a refinement sequence."""
        errors = np.asarray(errors, dtype=float)
        return np.log(errors[:-1] / errors[1:]) / math.log(ratio)


@pytest.fixture
def helpers():
    """Provide test helper methods."""
    return TestHelpers()
