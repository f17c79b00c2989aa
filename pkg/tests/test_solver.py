"""Tests for the mild-solution solver."""

import logging
import math

import numpy as np
import pytest

from fracns.exceptions import DomainError, GridMismatchError, PicardDivergenceError
from fracns.initial_data import random_bandlimited
from fracns.analysis import uniqueness_metric
from fracns.solver import (MildSolver, PropagatorTable, SolverConfig, classical_reference,
                           initial_trajectory, kernel_cross_check, linear_propagate,
                           memory_weights, picard_pair, picard_solve, propagator_kernel_spectral,
                           solve_forced, solve_mild, solve_mild_with_diagnostics)
from fracns.specfun import MLParams, mittag_leffler, mittag_leffler_values
from fracns.spectral import TorusGrid, Trajectory, l2_norm
from fracns.utils import TimeGrid


def _linear_config(alpha, time):
    return SolverConfig(alpha, time, nonlinear=False)


class TestSolverConfig:
    """Configuration validation."""

    @pytest.mark.parametrize("alpha", [0.0, 1.5, math.nan])
    def test_invalid_alpha(self, alpha):
        with pytest.raises(DomainError):
            SolverConfig(alpha, TimeGrid(1.0, 4))

    def test_invalid_tolerances(self):
        with pytest.raises(DomainError):
            SolverConfig(0.5, TimeGrid(1.0, 4), picard_tol=0.0)
        with pytest.raises(DomainError):
            SolverConfig(0.5, TimeGrid(1.0, 4), picard_max_iters=0)

    def test_small_alpha_is_flagged(self, caplog):
        with caplog.at_level(logging.WARNING, logger="fracns"):
            SolverConfig(0.3, TimeGrid(1.0, 4))
        assert any("alpha=0.3" in record.getMessage() for record in caplog.records)

    def test_one_dimensional_grid_rejected(self):
        with pytest.raises(DomainError):
            MildSolver(TorusGrid(1, 8), SolverConfig(0.5, TimeGrid(1.0, 4)))


class TestLinearPropagation:
    """Homogeneous term and memory weights."""

    def test_stokes_problem_is_exact(self, grid32, helpers):
        """Without F every node equals E_alpha(-|k|^2 t^alpha) u0 mode by mode."""
        u0 = random_bandlimited(grid32, seed=4, band=6, amplitude=1.0)
        time = TimeGrid(1.0, 16)
        trajectory = solve_mild(u0, _linear_config(0.6, time))
        for n in range(len(trajectory)):
            expected = linear_propagate(u0, 0.6, time.nodes[n])
            assert helpers.max_abs_difference(trajectory[n], expected) <= 1e-12

    def test_no_semigroup_property(self, grid16, helpers):
        """E_alpha((t1 + t2)^alpha Delta) differs from the composition unless alpha = 1."""
        u0 = helpers.single_mode_field(grid16)
        for alpha, check in ((0.5, lambda gap: gap > 1e-3), (1.0, lambda gap: gap <= 1e-14)):
            composed = linear_propagate(linear_propagate(u0, alpha, 0.5), alpha, 0.5)
            direct = linear_propagate(u0, alpha, 1.0)
            gap = l2_norm(composed - direct) / l2_norm(u0)
            assert check(gap), f"alpha={alpha}: gap {gap}"

    def test_time_zero_is_identity(self, tg16):
        assert linear_propagate(tg16, 0.7, 0.0) is tg16
        with pytest.raises(DomainError):
            linear_propagate(tg16, 0.7, -1.0)

    def test_memory_weights_sum(self):
        """Weights are nonnegative and sum to t^alpha E_{alpha,alpha+1}(-lambda t^alpha)."""
        time = TimeGrid(1.0, 20)
        for alpha in (0.4, 0.9, 1.0):
            for lam in (0.0, 2.0, 25.0):
                weights = memory_weights(alpha, lam, time, 20)
                assert weights.shape == (20,)
                assert np.all(weights >= 0.0)
                expected = mittag_leffler(MLParams(alpha, alpha + 1.0), -lam)
                assert weights.sum() == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9, 1.0])
    def test_modes_never_grow(self, helpers, alpha):
        """|u_k(t)| is non-increasing in t for every mode, Nyquist modes included."""
        grid = TorusGrid(2, 16)
        u0 = helpers.random_real_field(grid, seed=21, dealiased=False)
        times = TimeGrid(2.0, 32).nodes
        magnitudes = np.array([np.abs(linear_propagate(u0, alpha, t).coefficients) for t in times])
        assert np.all(np.diff(magnitudes, axis=0) <= 0.0)

    @pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9, 1.0])
    def test_decay_factor_monotone_in_lambda(self, alpha):
        lambdas = np.arange(0.0, 513.0)
        factors = mittag_leffler_values(MLParams(alpha, 1.0), -lambdas)
        assert factors[0] == 1.0
        assert np.all(np.diff(factors) <= 0.0)

    @pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
    def test_memory_weights_without_decay(self, alpha):
        """lambda = 0 leaves the Riemann-Liouville masses (s_k^alpha - s_{k+1}^alpha)/Gamma(alpha+1)."""
        time = TimeGrid(1.0, 16)
        lags = (16 - np.arange(17)) * time.dt
        expected = (lags[:-1] ** alpha - lags[1:] ** alpha) / math.gamma(alpha + 1.0)
        weights = memory_weights(alpha, 0.0, time, 16)
        np.testing.assert_allclose(weights, expected, rtol=1e-12)
        assert weights.sum() == pytest.approx(1.0 / math.gamma(alpha + 1.0), rel=1e-12)

    @pytest.mark.parametrize("lam", [0.5, 3.0, 40.0])
    def test_memory_weights_classical(self, lam):
        """alpha = 1 gives the exponential-integrator masses of (1 - exp(-lambda s))/lambda."""
        time = TimeGrid(1.0, 16)
        lags = (16 - np.arange(17)) * time.dt
        expected = np.exp(-lam * lags[1:]) * -np.expm1(-lam * time.dt) / lam
        weights = memory_weights(1.0, lam, time, 16)
        np.testing.assert_allclose(weights, expected, rtol=1e-10, atol=1e-14)

    def test_memory_weights_positive(self):
        time = TimeGrid(1.0, 64)
        for alpha in (0.3, 0.5, 0.7, 0.9):
            for lam in (0.0, 1.0, 32.0, 512.0):
                for n in (1, 8, 64):
                    weights = memory_weights(alpha, lam, time, n)
                    assert np.all(weights > 0.0), f"alpha={alpha} lambda={lam} n={n}"

    def test_memory_weights_domain(self):
        with pytest.raises(DomainError):
            memory_weights(0.5, 1.0, TimeGrid(1.0, 4), 5)
        with pytest.raises(DomainError):
            memory_weights(0.5, -1.0, TimeGrid(1.0, 4), 2)

    def test_propagator_table(self):
        time = TimeGrid(1.0, 4)
        table = PropagatorTable.build(0.5, time, np.array([0.0, 1.0]))
        assert table.decay.shape == (5, 2)
        assert np.all(table.decay[:, 0] == 1.0)
        np.testing.assert_allclose(table.step_weights.sum(axis=0), table.integrated[-1], rtol=1e-14)


class TestMildSolution:
    """Nonlinear solves."""

    def test_taylor_green_decay(self, grid16, tg16):
        """F vanishes on Taylor-Green, so u(t) = E_alpha(-2 t^alpha) u0."""
        time = TimeGrid(1.0, 32)
        for alpha in (0.7, 1.0):
            final = solve_mild(tg16, SolverConfig(alpha, time)).final
            factor = mittag_leffler(MLParams(alpha, 1.0), -2.0)
            np.testing.assert_allclose(final.coefficients, factor * tg16.coefficients, atol=1e-13)

    def test_alpha_one_matches_classical(self, perturbed16):
        time = TimeGrid(0.5, 32)
        fractional = solve_mild(perturbed16, SolverConfig(1.0, time))
        classical = classical_reference(perturbed16, time)
        gap = np.max(np.abs(fractional.coefficients - classical.coefficients))
        assert gap <= 1e-10

    def test_classical_taylor_green(self, tg16):
        """Classical Taylor-Green decays like exp(-2t)."""
        trajectory = classical_reference(tg16, TimeGrid(1.0, 8))
        np.testing.assert_allclose(trajectory.final.coefficients,
                                   math.exp(-2.0) * tg16.coefficients, atol=1e-14)

    def test_divergence_stays_zero(self, random16):
        solution = solve_mild_with_diagnostics(random16, SolverConfig(0.6, TimeGrid(0.5, 16)))
        assert len(solution.diagnostics) == 17
        assert max(d.max_divergence for d in solution.diagnostics) <= 1e-10
        assert solution.picard_iterations > 0
        assert solution.diagnostics[0].energy == pytest.approx(0.5 * l2_norm(random16) ** 2)

    def test_unprojected_data_is_projected(self, grid16, helpers):
        u0 = helpers.random_real_field(grid16, 8) * 0.05
        trajectory = solve_mild(u0, SolverConfig(0.8, TimeGrid(0.2, 4)))
        assert trajectory.div_free
        assert all(trajectory[n].check_invariants(1e-10) == [] for n in range(len(trajectory)))

    def test_three_dimensional_run(self, grid3d):
        u0 = random_bandlimited(grid3d, seed=2, band=2, amplitude=0.2)
        trajectory = solve_mild(u0, SolverConfig(0.8, TimeGrid(0.2, 4)))
        assert len(trajectory) == 5
        assert l2_norm(trajectory.final) < l2_norm(u0)

    def test_picard_budget_exhausted(self, grid16):
        u0 = random_bandlimited(grid16, seed=1, band=3, amplitude=2.0)
        cfg = SolverConfig(0.7, TimeGrid(0.5, 4), picard_max_iters=1)
        with pytest.raises(PicardDivergenceError) as excinfo:
            solve_mild(u0, cfg)
        assert excinfo.value.iterations == 1
        assert excinfo.value.residual > 0


class TestForcedProblem:
    """Driven fractional Stokes flow."""

    def test_constant_single_mode_forcing(self, grid16, helpers):
        """u(t) = t^alpha E_{alpha,alpha+1}(-t^alpha) h for constant forcing on |k| = 1."""
        alpha = 0.6
        time = TimeGrid(2.0, 10)
        h = helpers.single_mode_field(grid16)
        forcing = Trajectory.from_fields(time, [h] * 11)
        u = solve_forced(forcing, SolverConfig(alpha, time))
        for n in (1, 5, 10):
            t = time.nodes[n]
            factor = t ** alpha * mittag_leffler(MLParams(alpha, alpha + 1.0), -t ** alpha)
            assert helpers.max_abs_difference(u[n], h * factor) <= 1e-13

    def test_forcing_grid_checked(self, tg16):
        time = TimeGrid(1.0, 4)
        forcing = Trajectory.from_fields(TimeGrid(1.0, 2), [tg16] * 3)
        with pytest.raises(GridMismatchError):
            solve_forced(forcing, SolverConfig(0.5, time))


class TestGlobalPicard:
    """Global fixed-point iteration and the two-initialisation experiment."""

    def test_initial_trajectories(self, tg16):
        cfg = SolverConfig(0.6, TimeGrid(0.5, 4))
        linear = initial_trajectory("linear", tg16, cfg)
        zero = initial_trajectory("zero", tg16, cfg)
        np.testing.assert_allclose(linear[4].coefficients,
                                   linear_propagate(tg16, 0.6, 0.5).coefficients, atol=1e-15)
        assert l2_norm(zero[2]) == 0.0
        assert np.array_equal(zero[0].coefficients, linear[0].coefficients)
        with pytest.raises(DomainError):
            initial_trajectory("constant", tg16, cfg)

    def test_matches_marching_solver(self, perturbed16):
        cfg = SolverConfig(0.7, TimeGrid(0.5, 16))
        marched = solve_mild(perturbed16, cfg)
        fixed_point, sweeps = picard_solve(perturbed16, cfg, "zero")
        assert sweeps >= 2
        assert np.max(np.abs(marched.coefficients - fixed_point.coefficients)) <= 1e-9

    def test_pair_agrees(self, perturbed16):
        cfg = SolverConfig(0.6, TimeGrid(0.5, 16))
        first, second = picard_pair(perturbed16, cfg)
        metric = uniqueness_metric(first, second)
        assert metric <= (10.0 * cfg.picard_tol) ** 4 * 0.5 * (2.0 * math.pi) ** 2

    def test_sweep_budget(self, grid16):
        u0 = random_bandlimited(grid16, seed=1, band=3, amplitude=1.0)
        cfg = SolverConfig(0.7, TimeGrid(0.5, 8), picard_max_iters=2)
        with pytest.raises(PicardDivergenceError):
            picard_solve(u0, cfg, "zero")


class TestSpatialAccuracy:
    """Spectral resolution of smooth solutions."""

    @pytest.mark.slow
    def test_doubling_resolution(self, grid16):
        u0 = random_bandlimited(grid16, seed=6, band=1, amplitude=0.01)
        cfg = SolverConfig(0.8, TimeGrid(0.5, 16))
        coarse = solve_mild(u0, cfg).final
        fine = solve_mild(u0.resample(TorusGrid(2, 32)), cfg).final.resample(grid16)
        assert l2_norm(coarse - fine) <= 1e-8


class TestPhysicalKernel:
    """The 1D propagator kernel from both sides of the subordination formula."""

    def test_spectral_kernel_has_unit_mass(self):
        x, kernel = propagator_kernel_spectral(0.5, 1.0, points=1024)
        assert x.shape == kernel.shape == (1024,)
        assert kernel.sum() * (2.0 * math.pi / 1024) == pytest.approx(1.0, rel=1e-12)

    def test_kernel_points_validated(self):
        with pytest.raises(DomainError):
            propagator_kernel_spectral(0.5, 1.0, points=7)

    @pytest.mark.slow
    def test_subordination_cross_check(self):
        assert kernel_cross_check(0.5, 1.0) <= 1e-4
