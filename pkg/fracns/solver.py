"""
Time integration of the mild-solution formula

    u(t) = E_alpha(t^alpha Delta) u0
           + int_0^t (t - tau)^(alpha-1) E_{alpha,alpha}((t - tau)^alpha Delta) F(u(tau)) dtau,
    F(u) = -P div(u (x) u).

Each Fourier mode with lambda = |k|^2 evolves by scalar Mittag-Leffler
factors. The memory integral is taken with the density averaged over each
subinterval and the kernel integrated exactly via

    int_0^s r^(alpha-1) E_{alpha,alpha}(-lambda r^alpha) dr = s^alpha E_{alpha,alpha+1}(-lambda s^alpha),

so the singular factor never meets a quadrature node. The full history is
kept, which makes a run O(steps^2) in time.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from .exceptions import DomainError, GridMismatchError, PicardDivergenceError
from .logging import get_logger
from .specfun import (DEFAULT_POLICY, EvalPolicy, MLParams, checked_quad, mainardi,
                      mittag_leffler_values)
from .spectral import (SpectralField, TorusGrid, Trajectory, apply_multiplier,
                       leray_project, nonlinear_term)
from .utils import TimeGrid

logger = get_logger(__name__)

# Orders below this are accepted but flagged.
LOW_ALPHA_WARNING = 0.5


@dataclass(frozen=True)
class SolverConfig:
    """
    Settings for the fractional mild-solution solver.

    Attributes:
        alpha: Caputo order in (0, 1]
        time: Uniform time grid on [0, T]
        picard_tol: Absolute L^2 tolerance of the Picard iterations
        picard_max_iters: Iteration budget per step (or per sweep for picard_solve)
        ml_policy: Mittag-Leffler evaluation policy
        nonlinear: False drops F, leaving the fractional Stokes problem
    """
    alpha: float
    time: TimeGrid
    picard_tol: float = 1.0e-12
    picard_max_iters: int = 100
    ml_policy: EvalPolicy = DEFAULT_POLICY
    nonlinear: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.picard_tol > 0:
            raise DomainError(f"picard_tol must be positive, got {self.picard_tol}")
        if int(self.picard_max_iters) != self.picard_max_iters or self.picard_max_iters < 1:
            raise DomainError(f"picard_max_iters must be a positive integer, got {self.picard_max_iters}")
        if self.alpha < LOW_ALPHA_WARNING:
            logger.warning("alpha=%g is below %g; small orders are outside the validated range",
                           self.alpha, LOW_ALPHA_WARNING)


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step record written to the diagnostics CSV."""
    step: int
    time: float
    energy: float
    max_divergence: float
    picard_iterations: int


@dataclass
class MildSolution:
    """Trajectory plus the diagnostics collected while computing it."""
    trajectory: Trajectory
    diagnostics: List[StepDiagnostics] = field(default_factory=list)

    @property
    def picard_iterations(self) -> int:
        return sum(d.picard_iterations for d in self.diagnostics)


def _lag_powers(alpha: float, time: TimeGrid) -> np.ndarray:
    return time.nodes ** alpha


@dataclass(frozen=True)
class PropagatorTable:
    """
    Mittag-Leffler factors for every eigenvalue and every time lag j*dt.

    decay[j, i]      = E_alpha(-lambda_i (j dt)^alpha)
    integrated[j, i] = W(lambda_i, j dt) = (j dt)^alpha E_{alpha,alpha+1}(-lambda_i (j dt)^alpha)
    """
    alpha: float
    time: TimeGrid
    lambdas: np.ndarray
    decay: np.ndarray
    integrated: np.ndarray

    @classmethod
    def build(cls, alpha: float, time: TimeGrid, lambdas: np.ndarray,
              policy: EvalPolicy = DEFAULT_POLICY) -> "PropagatorTable":
        lambdas = np.asarray(lambdas, dtype=float)
        if np.any(lambdas < 0):
            raise DomainError("eigenvalues must be nonnegative")
        powers = _lag_powers(alpha, time)
        arguments = -np.outer(powers, lambdas)
        decay = mittag_leffler_values(MLParams(alpha, 1.0), arguments, policy)
        integrated = powers[:, np.newaxis] * mittag_leffler_values(
            MLParams(alpha, alpha + 1.0), arguments, policy)
        logger.debug("propagator table: alpha=%g, %d lags x %d eigenvalues",
                     alpha, powers.size, lambdas.size)
        return cls(alpha, time, lambdas, decay, integrated)

    @property
    def step_weights(self) -> np.ndarray:
        """omega[j] = W((j+1) dt) - W(j dt), shape (steps, n_lambda)."""
        return np.diff(self.integrated, axis=0)


def linear_propagate(u0: SpectralField, alpha: float, t: float,
                     policy: Optional[EvalPolicy] = None) -> SpectralField:
    """
    Homogeneous term E_alpha(t^alpha Delta) u0, mode by mode.

    Raises:
        DomainError: For t < 0 or alpha outside (0, 1]
    """
    if not (math.isfinite(t) and t >= 0):
        raise DomainError(f"t must be finite and nonnegative, got {t}")
    if t == 0:
        return u0
    lambdas, inverse = np.unique(u0.grid.laplacian_symbol, return_inverse=True)
    factors = mittag_leffler_values(MLParams(alpha, 1.0), -lambdas * t ** alpha, policy)
    return apply_multiplier(u0, factors[inverse].reshape(u0.grid.shape))


def memory_weights(alpha: float, lam: float, time: TimeGrid, n: int,
                   policy: Optional[EvalPolicy] = None) -> np.ndarray:
    """
    Weights of the memory integral at t_n for one eigenvalue lambda.

    Entry k is W(lambda, t_n - t_k) - W(lambda, t_n - t_{k+1}), the exact kernel
    mass over [t_k, t_{k+1}]; the weights sum to W(lambda, t_n).
    """
    if int(n) != n or not 1 <= n <= time.steps:
        raise DomainError(f"step index must lie in 1..{time.steps}, got {n}")
    if not (math.isfinite(lam) and lam >= 0):
        raise DomainError(f"lambda must be finite and nonnegative, got {lam}")
    lags = (n - np.arange(n + 1)) * time.dt
    powers = lags ** alpha
    integrated = powers * mittag_leffler_values(MLParams(alpha, alpha + 1.0), -lam * powers, policy)
    return integrated[:-1] - integrated[1:]


class ModeSpace:
    """The dealiased modes of a grid, flattened for per-mode arithmetic."""

    def __init__(self, grid: TorusGrid):
        self.grid = grid
        self.mask = grid.dealias_mask
        self.ncomp = grid.dim
        self.lambdas, self.lambda_index = np.unique(grid.laplacian_symbol[self.mask],
                                                    return_inverse=True)
        self.derivative = grid.derivative_wavenumbers[:, self.mask]

    @property
    def size(self) -> int:
        return int(self.lambda_index.size)

    def restrict(self, u: SpectralField) -> np.ndarray:
        if u.grid != self.grid or u.ncomp != self.ncomp:
            raise GridMismatchError(f"field on {u.grid} does not belong to {self.grid}")
        return np.array(u.coefficients[:, self.mask])

    def embed(self, values: np.ndarray, div_free: bool = True) -> SpectralField:
        full = np.zeros((values.shape[0],) + self.grid.shape, dtype=complex)
        full[:, self.mask] = values
        return SpectralField(self.grid, full, div_free)

    def trajectory(self, time: TimeGrid, states: np.ndarray) -> Trajectory:
        full = np.zeros((states.shape[0], self.ncomp) + self.grid.shape, dtype=complex)
        full[:, :, self.mask] = states
        return Trajectory(self.grid, time, full, div_free=True)

    def nonlinear(self, values: np.ndarray) -> np.ndarray:
        return self.restrict(nonlinear_term(self.embed(values)))

    def norm(self, values: np.ndarray) -> float:
        return math.sqrt(self.grid.volume * float(np.sum(np.abs(values) ** 2)))

    def max_divergence(self, values: np.ndarray) -> float:
        return float(np.max(np.abs(np.sum(self.derivative * values, axis=0)), initial=0.0))

    def diagnostics(self, step: int, t: float, values: np.ndarray, iterations: int) -> StepDiagnostics:
        return StepDiagnostics(step, t, 0.5 * self.norm(values) ** 2,
                               self.max_divergence(values), iterations)


def _close_step(base: np.ndarray, half_weight: np.ndarray, guess: np.ndarray,
                space: ModeSpace, tol: float, max_iters: int, step: int):
    """Solve u = base + half_weight * F(u) by Picard iteration from guess."""
    u = guess
    change = math.nan
    for iteration in range(1, max_iters + 1):
        u_next = base + half_weight * space.nonlinear(u)
        change = space.norm(u_next - u)
        u = u_next
        if not math.isfinite(change):
            break
        if change <= tol:
            return u, space.nonlinear(u), iteration
    raise PicardDivergenceError(
        f"Picard iteration at step {step} did not converge in {max_iters} iterations "
        f"(last change {change:.3e}); reduce dt or the data amplitude",
        iterations=max_iters, residual=change)


def _forcing_densities(space: ModeSpace, h: Optional[Trajectory], time: TimeGrid) -> np.ndarray:
    """Per-interval forcing P (h_k + h_{k+1}) / 2 on the dealiased modes."""
    densities = np.zeros((time.steps, space.ncomp, space.size), dtype=complex)
    if h is None:
        return densities
    if h.grid != space.grid or h.times != time or h.ncomp != space.ncomp:
        raise GridMismatchError("forcing trajectory does not match the solver grids")
    nodes = np.stack([space.restrict(leray_project(h[n])) for n in range(len(h))])
    return 0.5 * (nodes[:-1] + nodes[1:])


class MildSolver:
    """
    Marching solver for the fractional Navier-Stokes mild solution.

    The density on [t_k, t_{k+1}] is (F(u_k) + F(u_{k+1}))/2 plus any forcing;
    the unknown F(u_n) of the last interval is closed by Picard iteration.
    """

    def __init__(self, grid: TorusGrid, config: SolverConfig):
        if grid.dim not in (2, 3):
            raise DomainError(f"the solver runs on 2D or 3D grids, got dim={grid.dim}")
        self.grid = grid
        self.config = config
        self.space = ModeSpace(grid)
        self._table: Optional[PropagatorTable] = None

    @property
    def table(self) -> PropagatorTable:
        if self._table is None:
            self._table = PropagatorTable.build(self.config.alpha, self.config.time,
                                                self.space.lambdas, self.config.ml_policy)
        return self._table

    def _mode_tables(self) -> Tuple[np.ndarray, np.ndarray]:
        index = self.space.lambda_index
        return self.table.decay[:, index], self.table.step_weights[:, index]

    def _initial_state(self, u0: SpectralField) -> np.ndarray:
        if not u0.div_free:
            u0 = leray_project(u0)
        return self.space.restrict(u0)

    def solve(self, u0: SpectralField, forcing: Optional[Trajectory] = None) -> MildSolution:
        """
        March the mild-solution formula over the configured time grid.

        Args:
            u0: Initial velocity (projected if not tagged divergence-free)
            forcing: Optional forcing trajectory h; the solver uses P h

        Returns:
            MildSolution with the trajectory and per-step diagnostics

        Raises:
            PicardDivergenceError: If a step's Picard iteration does not converge
        """
        cfg = self.config
        time = cfg.time
        space = self.space
        steps = time.steps
        decay, omega = self._mode_tables()
        forcing_density = _forcing_densities(space, forcing, time)

        state0 = self._initial_state(u0)
        states = np.zeros((steps + 1, space.ncomp, space.size), dtype=complex)
        densities = np.zeros_like(forcing_density)
        states[0] = state0
        zero_f = np.zeros_like(state0)
        f_prev = space.nonlinear(state0) if cfg.nonlinear else zero_f
        diagnostics = [space.diagnostics(0, 0.0, state0, 0)]

        for n in range(1, steps + 1):
            base = decay[n] * state0 + omega[0] * (0.5 * f_prev + forcing_density[n - 1])
            if n > 1:
                base = base + np.einsum("kj,kcj->cj", omega[n - 1:0:-1], densities[:n - 1])
            if cfg.nonlinear:
                state, f_now, iterations = _close_step(
                    base, 0.5 * omega[0], states[n - 1], space,
                    cfg.picard_tol, cfg.picard_max_iters, n)
            else:
                state, f_now, iterations = base, zero_f, 0
            states[n] = state
            densities[n - 1] = 0.5 * (f_prev + f_now) + forcing_density[n - 1]
            f_prev = f_now
            diagnostics.append(space.diagnostics(n, time.nodes[n], state, iterations))
            logger.debug("step %d/%d: %d Picard iterations", n, steps, iterations)

        return MildSolution(space.trajectory(time, states), diagnostics)

    def sweep(self, state0: np.ndarray, states: np.ndarray,
              forcing_density: np.ndarray) -> np.ndarray:
        """Apply the discrete mild-solution map once to a whole trajectory."""
        decay, omega = self._mode_tables()
        if self.config.nonlinear:
            f_nodes = np.stack([self.space.nonlinear(s) for s in states])
        else:
            f_nodes = np.zeros_like(states)
        densities = 0.5 * (f_nodes[:-1] + f_nodes[1:]) + forcing_density
        mapped = np.empty_like(states)
        mapped[0] = state0
        for n in range(1, states.shape[0]):
            mapped[n] = decay[n] * state0 + np.einsum("kj,kcj->cj", omega[n - 1::-1], densities[:n])
        return mapped

    def initial_trajectory(self, kind: str, u0: SpectralField) -> Trajectory:
        state0 = self._initial_state(u0)
        if kind == "linear":
            decay, _ = self._mode_tables()
            states = decay[:, np.newaxis, :] * state0[np.newaxis]
        elif kind == "zero":
            states = np.zeros((self.config.time.steps + 1,) + state0.shape, dtype=complex)
            states[0] = state0
        else:
            raise DomainError(f"unknown initial trajectory kind '{kind}' (expected 'linear' or 'zero')")
        return self.space.trajectory(self.config.time, states)

    def picard_solve(self, u0: SpectralField,
                     initial: Union[str, Trajectory] = "linear") -> Tuple[Trajectory, int]:
        """
        Global fixed-point iteration of the discrete mild-solution map.

        Args:
            u0: Initial velocity
            initial: "linear", "zero" or a starting Trajectory

        Returns:
            (converged trajectory, number of sweeps)

        Raises:
            PicardDivergenceError: If picard_max_iters sweeps do not converge
        """
        cfg = self.config
        state0 = self._initial_state(u0)
        if isinstance(initial, str):
            initial = self.initial_trajectory(initial, u0)
        if initial.grid != self.grid or initial.times != cfg.time:
            raise GridMismatchError("initial trajectory does not match the solver grids")
        states = np.array(initial.coefficients[:, :, self.space.mask])
        forcing_density = _forcing_densities(self.space, None, cfg.time)

        change = math.nan
        for sweep in range(1, cfg.picard_max_iters + 1):
            mapped = self.sweep(state0, states, forcing_density)
            change = max(self.space.norm(m - s) for m, s in zip(mapped, states))
            states = mapped
            logger.debug("Picard sweep %d: sup change %.3e", sweep, change)
            if not math.isfinite(change):
                break
            if change <= cfg.picard_tol:
                return self.space.trajectory(cfg.time, states), sweep
        raise PicardDivergenceError(
            f"global Picard iteration did not converge in {cfg.picard_max_iters} sweeps "
            f"(last change {change:.3e})", iterations=cfg.picard_max_iters, residual=change)


def solve_mild_with_diagnostics(u0: SpectralField, cfg: SolverConfig,
                                forcing: Optional[Trajectory] = None) -> MildSolution:
    return MildSolver(u0.grid, cfg).solve(u0, forcing)


def solve_mild(u0: SpectralField, cfg: SolverConfig) -> Trajectory:
    """
    Fractional Navier-Stokes mild solution on cfg.time.

    Raises:
        PicardDivergenceError: If a step's Picard iteration does not converge
    """
    return solve_mild_with_diagnostics(u0, cfg).trajectory


def solve_forced(h: Trajectory, cfg: SolverConfig,
                 u0: Optional[SpectralField] = None) -> Trajectory:
    """
    Driven linear problem: fractional Stokes flow forced by P h.

    u0 defaults to zero. h must live on cfg.time.
    """
    if u0 is None:
        u0 = SpectralField(h.grid, np.zeros((h.grid.dim,) + h.grid.shape, dtype=complex), True)
    linear_cfg = SolverConfig(cfg.alpha, cfg.time, cfg.picard_tol, cfg.picard_max_iters,
                              cfg.ml_policy, nonlinear=False)
    return MildSolver(h.grid, linear_cfg).solve(u0, h).trajectory


def initial_trajectory(kind: str, u0: SpectralField, cfg: SolverConfig) -> Trajectory:
    """
    Starting trajectory for picard_solve.

    "linear" is E_alpha(t^alpha Delta) u0 at every node; "zero" is u0 at t = 0
    and zero afterwards.
    """
    return MildSolver(u0.grid, cfg).initial_trajectory(kind, u0)


def picard_solve(u0: SpectralField, cfg: SolverConfig,
                 initial: Union[str, Trajectory] = "linear") -> Tuple[Trajectory, int]:
    """Module-level form of MildSolver.picard_solve."""
    return MildSolver(u0.grid, cfg).picard_solve(u0, initial)


def picard_pair(u0: SpectralField, cfg: SolverConfig,
                init_a: Union[str, Trajectory] = "linear",
                init_b: Union[str, Trajectory] = "zero") -> Tuple[Trajectory, Trajectory]:
    """
    Two independently initialised fixed-point solves of the same problem.

    Raises:
        PicardDivergenceError: If either branch fails to converge
    """
    solver = MildSolver(u0.grid, cfg)
    first, sweeps_a = solver.picard_solve(u0, init_a)
    second, sweeps_b = solver.picard_solve(u0, init_b)
    logger.info("picard_pair converged in %d and %d sweeps", sweeps_a, sweeps_b)
    return first, second


def classical_reference_with_diagnostics(u0: SpectralField, time: TimeGrid,
                                         picard_tol: float = 1.0e-12,
                                         picard_max_iters: int = 100,
                                         nonlinear: bool = True,
                                         forcing: Optional[Trajectory] = None) -> MildSolution:
    """
    Classical (alpha = 1) Navier-Stokes by a step-local exponential integrator.

    u_{n+1} = e^{-lambda dt} u_n + phi(lambda dt) ((F_n + F_{n+1})/2 + forcing),
    phi = (1 - e^{-lambda dt}) / lambda, with F_{n+1} closed by Picard iteration.
    """
    space = ModeSpace(u0.grid)
    lam = space.lambdas[space.lambda_index]
    dt = time.dt
    propagator = np.exp(-lam * dt)
    phi = np.where(lam == 0.0, dt, -np.expm1(-lam * dt) / np.where(lam == 0.0, 1.0, lam))
    forcing_density = _forcing_densities(space, forcing, time)

    state = space.restrict(u0 if u0.div_free else leray_project(u0))
    zero_f = np.zeros_like(state)
    f_prev = space.nonlinear(state) if nonlinear else zero_f
    states = [state]
    diagnostics = [space.diagnostics(0, 0.0, state, 0)]
    for n in range(1, time.steps + 1):
        base = propagator * state + phi * (0.5 * f_prev + forcing_density[n - 1])
        if nonlinear:
            state, f_prev, iterations = _close_step(base, 0.5 * phi, state, space,
                                                    picard_tol, picard_max_iters, n)
        else:
            state, iterations = base, 0
        states.append(state)
        diagnostics.append(space.diagnostics(n, time.nodes[n], state, iterations))
    return MildSolution(space.trajectory(time, np.stack(states)), diagnostics)


def classical_reference(u0: SpectralField, time: TimeGrid, picard_tol: float = 1.0e-12,
                        picard_max_iters: int = 100) -> Trajectory:
    """Classical Navier-Stokes reference trajectory (unit viscosity)."""
    return classical_reference_with_diagnostics(u0, time, picard_tol, picard_max_iters).trajectory


def propagator_kernel_spectral(alpha: float, t: float, points: int = 16384,
                               policy: Optional[EvalPolicy] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Physical 1D kernel of E_alpha(t^alpha Delta) on the 2*pi-periodic line,
    (1/2pi) sum_k E_alpha(-t^alpha k^2) e^{ikx}, sampled at x_j = 2 pi j / points.
    """
    if int(points) != points or points < 4 or points % 2:
        raise DomainError(f"points must be an even integer >= 4, got {points}")
    k = np.fft.fftfreq(points, 1.0 / points)
    symbol = mittag_leffler_values(MLParams(alpha, 1.0), -(t ** alpha) * k ** 2, policy)
    kernel = np.fft.ifft(symbol).real * points / (2.0 * math.pi)
    return 2.0 * math.pi * np.arange(points) / points, kernel


def propagator_kernel_subordinated(alpha: float, t: float, x: float, images: int = 3,
                                   policy: Optional[EvalPolicy] = None) -> float:
    """
    The same kernel from the Mainardi subordination formula

        int_0^inf M_alpha(theta) exp(-x^2 / (4 theta t^alpha)) / sqrt(4 pi theta t^alpha) dtheta,

    summed over the periodic images x + 2 pi m, |m| <= images.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"subordination needs 0 < alpha < 1, got {alpha}")
    policy = policy or DEFAULT_POLICY
    scale = t ** alpha
    upper = 4.0
    while mainardi(alpha, upper, policy) > 1.0e-18 and upper < 1.0e3:
        upper *= 1.5

    def gaussian_sum(theta: float) -> float:
        total = 0.0
        for m in range(-images, images + 1):
            shifted = x + 2.0 * math.pi * m
            total += math.exp(-shifted * shifted / (4.0 * theta * scale))
        return total

    def density(theta: float) -> float:
        return mainardi(alpha, theta, policy) * gaussian_sum(theta) / (2.0 * math.sqrt(math.pi * scale))

    head = checked_quad(density, 0.0, 1.0, epsabs=1.0e-12, epsrel=1.0e-10,
                        weight="alg", wvar=(-0.5, 0.0))
    tail = checked_quad(lambda theta: density(theta) / math.sqrt(theta), 1.0, upper,
                        epsabs=1.0e-12, epsrel=1.0e-10, limit=400)
    return head + tail


def kernel_cross_check(alpha: float, t: float, points: int = 16384,
                       sample_indices: Optional[List[int]] = None,
                       policy: Optional[EvalPolicy] = None) -> float:
    """Largest gap between the Fourier-side and subordinated kernels at sample points."""
    x, kernel = propagator_kernel_spectral(alpha, t, points, policy)
    if sample_indices is None:
        sample_indices = [0, points // 16, points // 8, points // 4, points // 2]
    gaps = [abs(kernel[j] - propagator_kernel_subordinated(alpha, t, float(x[j]), policy=policy))
            for j in sample_indices]
    return max(gaps)
