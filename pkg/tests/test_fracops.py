"""Tests for the fractional time operators and the fractional Laplacian."""

import math

import numpy as np
import pytest
from scipy import integrate

from fracns.exceptions import DomainError, GridMismatchError
from fracns.fracops import (caputo_derivative, frac_laplacian_apply, frac_laplacian_constant,
                            l1_coefficients, product_integration_weights, rl_integral,
                            singular_integral_laplacian_1d)
from fracns.spectral import TorusGrid, laplacian, transform_forward, transform_inverse
from fracns.utils import SampledSignal, TimeGrid


def _signal(func, t_end=1.0, steps=64):
    return SampledSignal.from_function(TimeGrid(t_end, steps), func)


class TestProductIntegration:
    """Exact kernel weights on piecewise-linear data."""

    def test_constant_data_on_nonuniform_nodes(self):
        """Weights integrate 1 exactly: sum w_k = s_n^alpha / alpha."""
        nodes = np.array([0.0, 0.1, 0.15, 0.4, 0.7, 1.3])
        for alpha in (0.3, 0.8, 1.0):
            for n in range(1, len(nodes)):
                weights = product_integration_weights(nodes, n, alpha)
                assert weights.shape == (n + 1,)
                expected = (nodes[n] - nodes[0]) ** alpha / alpha
                assert weights.sum() == pytest.approx(expected, rel=1e-13)

    def test_linear_data_is_exact(self):
        """int_0^s (s - t)^(alpha-1) t dt = s^(alpha+1) / (alpha (alpha + 1))."""
        nodes = np.array([0.0, 0.2, 0.5, 0.6, 1.0])
        alpha = 0.4
        weights = product_integration_weights(nodes, 4, alpha)
        assert weights @ nodes == pytest.approx(1.0 / (alpha * (alpha + 1.0)), rel=1e-13)

    def test_zero_index(self):
        assert product_integration_weights(np.array([0.0, 1.0]), 0, 0.5).tolist() == [0.0]

    def test_rejects_unsorted_nodes(self):
        with pytest.raises(DomainError):
            product_integration_weights(np.array([0.0, 0.5, 0.4]), 2, 0.5)


class TestRiemannLiouville:
    """Riemann-Liouville integral on sampled signals."""

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
    def test_linear_signal_exact(self, alpha):
        """I^alpha t = t^(1+alpha) / Gamma(2+alpha)."""
        h = _signal(lambda t: t)
        result = rl_integral(h, alpha)
        expected = h.times ** (1.0 + alpha) / math.gamma(2.0 + alpha)
        np.testing.assert_allclose(result.values, expected, rtol=1e-12, atol=1e-15)

    def test_order_one_is_cumulative_trapezoid(self):
        h = _signal(lambda t: t ** 2, steps=40)
        expected = integrate.cumulative_trapezoid(h.values, h.times, initial=0.0)
        np.testing.assert_allclose(rl_integral(h, 1.0).values, expected, rtol=1e-12, atol=1e-15)

    def test_invalid_order(self):
        h = _signal(lambda t: t)
        for alpha in (0.0, -0.5, 1.5):
            with pytest.raises(DomainError):
                rl_integral(h, alpha)


class TestCaputo:
    """Caputo derivative by the L1 scheme."""

    def test_l1_coefficients(self):
        b = l1_coefficients(0.5, 4)
        np.testing.assert_allclose(b, [1.0, math.sqrt(2) - 1.0, math.sqrt(3) - math.sqrt(2),
                                       2.0 - math.sqrt(3)])

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
    def test_linear_signal_exact(self, alpha):
        """D^alpha t = t^(1-alpha) / Gamma(2-alpha) at every node."""
        h = _signal(lambda t: t)
        result = caputo_derivative(h, alpha)
        expected = h.times ** (1.0 - alpha) / math.gamma(2.0 - alpha)
        np.testing.assert_allclose(result.values, expected, rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    def test_convergence_rate_on_square(self, helpers, alpha):
        """Error of D^alpha t^2 at t = 1 decays like dt^(2-alpha)."""
        exact = 2.0 / math.gamma(3.0 - alpha)
        errors = []
        for steps in (64, 128, 256, 512):
            result = caputo_derivative(_signal(lambda t: t ** 2, steps=steps), alpha)
            errors.append(abs(result.values[-1] - exact))
        orders = helpers.observed_order(errors)
        assert np.all(orders >= 2.0 - alpha - 0.1), f"observed orders {orders}"

    def test_round_trip_with_rl_integral(self):
        """I^alpha D^alpha h = h for h(0) = 0."""
        alpha = 0.6
        h = _signal(np.sin, steps=1024)
        restored = rl_integral(caputo_derivative(h, alpha), alpha)
        assert np.max(np.abs(restored.values - h.values)) <= 1e-3

    def test_order_one_rejected(self):
        with pytest.raises(DomainError):
            caputo_derivative(_signal(lambda t: t), 1.0)


class TestFractionalLaplacian:
    """(-Delta)^s as a Fourier multiplier and as a singular integral."""

    def test_constant_at_one_half(self):
        """C(1, 1/2) = 1 / pi."""
        assert frac_laplacian_constant(1, 0.5) == pytest.approx(1.0 / math.pi, rel=1e-14)

    def test_constant_domain(self):
        with pytest.raises(DomainError):
            frac_laplacian_constant(1, 1.0)
        with pytest.raises(DomainError):
            frac_laplacian_constant(0, 0.5)

    def test_multiplier_on_trigonometric_polynomial(self):
        grid = TorusGrid(1, 32)
        (x,) = grid.coordinates()
        field = transform_forward(grid, np.cos(x) + 0.5 * np.sin(3.0 * x))
        for s in (0.25, 0.5, 0.9):
            result = transform_inverse(frac_laplacian_apply(field, s))[0]
            expected = np.cos(x) + 0.5 * 9.0 ** s * np.sin(3.0 * x)
            np.testing.assert_allclose(result, expected, atol=1e-13)

    def test_order_one_is_negative_laplacian(self, helpers):
        grid = TorusGrid(2, 16)
        field = helpers.random_real_field(grid, seed=5)
        difference = frac_laplacian_apply(field, 1.0) + laplacian(field)
        assert np.max(np.abs(difference.coefficients)) <= 1e-12

    def test_mean_maps_to_zero(self):
        grid = TorusGrid(1, 8)
        field = transform_forward(grid, np.full(grid.shape, 3.0))
        assert np.max(np.abs(frac_laplacian_apply(field, 0.5).coefficients)) == 0.0

    @pytest.mark.parametrize("s", [0.3, 0.5, 0.75])
    def test_singular_integral_matches_multiplier(self, s):
        """The principal-value integral reproduces the Fourier multiplier."""
        def func(x):
            return math.cos(x) + 0.5 * math.sin(3.0 * x)

        for x in (0.0, 0.7, 2.0):
            expected = math.cos(x) + 0.5 * 9.0 ** s * math.sin(3.0 * x)
            value = singular_integral_laplacian_1d(func, x, s)
            assert abs(value - expected) <= 1e-4

    def test_invalid_order(self):
        grid = TorusGrid(1, 8)
        field = transform_forward(grid, np.zeros(grid.shape))
        with pytest.raises(DomainError):
            frac_laplacian_apply(field, 0.0)
        with pytest.raises(DomainError):
            frac_laplacian_apply(field, 1.5)


class TestSignalValidation:
    """Sampled signals must match their grid."""

    def test_length_mismatch(self):
        with pytest.raises(GridMismatchError):
            SampledSignal(TimeGrid(1.0, 4), np.zeros(4))
