"""
Executable checks of inequalities and estimates on sampled data and solver output.

Every checker returns an EstimateReport (lhs, rhs, ratio, holds). Constants
that are not known in closed form are passed in explicitly and default to 1,
so ratios are the primary output.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import DegenerateInputError, DomainError, GridMismatchError
from .fracops import product_integration_weights
from .initial_data import random_bandlimited
from .logging import get_logger
from .specfun import EvalPolicy, MLParams, gamma_fn, mittag_leffler, mittag_leffler_values
from .spectral import (SpectralField, TorusGrid, Trajectory, gradient, l2_norm, laplacian,
                       lp_norm_samples, nonlinear_term, norm_pqT, time_lq_norm, transform_forward,
                       transform_inverse)
from .solver import SolverConfig, solve_forced
from .utils import (HOLDS_SLACK, EstimateReport, EstimateRow, NormSpec, SampledSignal,
                    TimeGrid, safe_ratio)

logger = get_logger(__name__)

# Positive Mittag-Leffler arguments in Gronwall envelopes can be large.
ENVELOPE_POLICY = EvalPolicy(z_max=40.0, max_terms=20000)

# Margin applied to the measured Lipschitz ratio of F when building g.
LIPSCHITZ_MARGIN = 1.5


@dataclass(frozen=True)
class GronwallInput:
    """
    Data of a fractional Gronwall inequality on a common time grid.

    Attributes:
        u: Nonnegative function being bounded
        v: Nonnegative additive term
        g: Nonnegative, non-decreasing coefficient
        alpha: Order in (0, 1]
        psi: Strictly increasing time change, sampled at the grid nodes
    """
    u: SampledSignal
    v: SampledSignal
    g: SampledSignal
    alpha: float
    psi: SampledSignal

    def __post_init__(self):
        grid = self.u.grid
        for name in ("v", "g", "psi"):
            if getattr(self, name).grid != grid:
                raise GridMismatchError(f"signal {name} is sampled on a different grid")
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        for name in ("u", "v", "g"):
            if np.any(getattr(self, name).values < 0):
                raise DomainError(f"{name} must be nonnegative")
        if np.any(np.diff(self.g.values) < 0):
            raise DomainError("g must be non-decreasing")
        if np.any(np.diff(self.psi.values) <= 0):
            raise DomainError("psi must be strictly increasing")

    @property
    def grid(self) -> TimeGrid:
        return self.u.grid


def _envelope(alpha: float, argument: np.ndarray) -> np.ndarray:
    return mittag_leffler_values(MLParams(alpha, 1.0), argument, ENVELOPE_POLICY)


def gronwall_check(data: GronwallInput, T: Optional[float] = None,
                   integrand: str = "u") -> EstimateReport:
    """
    Evaluate hypothesis and conclusion of the fractional Gronwall inequality.

    Hypothesis at t:  u(t) <= v(t) + g(t) int_0^t psi'(tau) (psi(t) - psi(tau))^(alpha-1) w(tau) dtau
    with w = u (integrand="u") or w = v (integrand="v").
    Conclusion at t:  u(t) <= v(t) E_alpha(g(t) Gamma(alpha) [psi(T) - psi(0)]^alpha).

    Args:
        data: Sampled u, v, g, psi and alpha
        T: Horizon (defaults to the grid end); only nodes t <= T are checked
        integrand: Which function sits under the hypothesis integral

    Returns:
        Report whose rows carry every node; holds means the conclusion is
        satisfied at every node where the hypothesis is satisfied. Each row
        also records the t-dependent envelope with psi(t) in place of psi(T).
    """
    if integrand not in ("u", "v"):
        raise DomainError(f"integrand must be 'u' or 'v', got '{integrand}'")
    grid = data.grid
    T = grid.t_end if T is None else float(T)
    if not 0.0 < T <= grid.t_end * (1.0 + 1.0e-12):
        raise DomainError(f"T must lie in (0, {grid.t_end}], got {T}")
    last = int(np.searchsorted(grid.nodes, T * (1.0 + 1.0e-12), side="right")) - 1

    alpha = data.alpha
    psi = data.psi.values[:last + 1]
    u = data.u.values[:last + 1]
    v = data.v.values[:last + 1]
    g = data.g.values[:last + 1]
    w = (data.u if integrand == "u" else data.v).values[:last + 1]

    span = psi[-1] - psi[0]
    envelope_T = v * _envelope(alpha, g * gamma_fn(alpha) * span ** alpha)
    envelope_t = v * _envelope(alpha, g * gamma_fn(alpha) * (psi - psi[0]) ** alpha)

    rows = []
    for n in range(last + 1):
        memory = product_integration_weights(psi, n, alpha) @ w[:n + 1]
        hypothesis_rhs = v[n] + g[n] * memory
        hypothesis = bool(u[n] <= hypothesis_rhs * (1.0 + HOLDS_SLACK))
        conclusion = bool(u[n] <= envelope_T[n] * (1.0 + HOLDS_SLACK))
        rows.append(EstimateRow(
            t=float(grid.nodes[n]), lhs=float(u[n]), rhs=float(envelope_T[n]),
            ratio=safe_ratio(u[n], envelope_T[n]), holds=conclusion,
            extra=(("hypothesis_rhs", float(hypothesis_rhs)),
                   ("hypothesis_holds", 1.0 if hypothesis else 0.0),
                   ("envelope_t", float(envelope_t[n])))))

    checked = [row for row in rows if dict(row.extra)["hypothesis_holds"] == 1.0]
    failed = len(rows) - len(checked)
    if failed:
        logger.warning("Gronwall hypothesis fails at %d of %d nodes", failed, len(rows))
    context = f"gronwall alpha={alpha:g} T={T:g} integrand={integrand}"
    if not checked:
        return EstimateReport(0.0, 0.0, 0.0, True, context + " (hypothesis never satisfied)",
                              tuple(rows))
    worst = max(checked, key=lambda row: row.ratio)
    return EstimateReport(worst.lhs, worst.rhs, worst.ratio,
                          all(row.holds for row in checked), context, tuple(rows))


def solver_difference_gronwall_input(a: Trajectory, b: Trajectory, cfg: SolverConfig) -> GronwallInput:
    """
    Gronwall data from two solver runs that differ in their initial data.

    u = ||a - b||_2 per node, v = ||a_0 - b_0||_2, psi(t) = t and
    g = margin * L / Gamma(alpha) with L the largest measured ratio
    ||F(a) - F(b)|| / ||a - b|| along the trajectories.
    """
    if a.grid != b.grid or a.times != b.times:
        raise GridMismatchError("trajectories live on different grids")
    times = a.times
    distance = np.array([l2_norm(a[n] - b[n]) for n in range(len(a))])
    lipschitz = 0.0
    for n in range(len(a)):
        if distance[n] > 0:
            gap = l2_norm(nonlinear_term(a[n]) - nonlinear_term(b[n]))
            lipschitz = max(lipschitz, gap / distance[n])
    g_value = LIPSCHITZ_MARGIN * lipschitz / gamma_fn(cfg.alpha)
    ones = np.ones(times.steps + 1)
    return GronwallInput(
        u=SampledSignal(times, distance),
        v=SampledSignal(times, distance[0] * ones),
        g=SampledSignal(times, g_value * ones),
        alpha=cfg.alpha,
        psi=SampledSignal(times, times.nodes))


def power_inequality_check(a: float, b: float, beta: float, strict: bool = True) -> EstimateReport:
    """
    (a + b)^beta <= 2^(beta-1) (a^beta + b^beta) for a, b >= 0 and beta >= 1.

    strict=False admits 0 < beta < 1 so counterexamples can be evaluated.
    """
    if not (math.isfinite(a) and math.isfinite(b) and a >= 0 and b >= 0):
        raise DomainError(f"a and b must be finite and nonnegative, got {a}, {b}")
    if not math.isfinite(beta) or beta <= 0 or (strict and beta < 1.0):
        raise DomainError(f"beta must be >= 1, got {beta}")
    lhs = (a + b) ** beta
    rhs = 2.0 ** (beta - 1.0) * (a ** beta + b ** beta)
    return EstimateReport.compare(lhs, rhs, f"power a={a:g} b={b:g} beta={beta:g}")


def _as_samples(u: Union[SpectralField, np.ndarray], grid: TorusGrid) -> np.ndarray:
    if isinstance(u, SpectralField):
        if u.grid != grid:
            raise GridMismatchError("field lives on a different grid")
        return transform_inverse(u)
    samples = np.asarray(u, dtype=float)
    if samples.shape == grid.shape:
        samples = samples[np.newaxis]
    if samples.shape[1:] != grid.shape:
        raise GridMismatchError(f"sample shape {samples.shape} does not match grid {grid.shape}")
    return samples


def gradient_samples(field: SpectralField) -> np.ndarray:
    """All first derivatives d_j u_c as physical samples, shape (ncomp*dim, M, ...)."""
    parts = [transform_inverse(gradient(SpectralField(field.grid, field.coefficients[c:c + 1])))
             for c in range(field.ncomp)]
    return np.concatenate(parts)


def sobolev_exponent(p: float, dim: int) -> float:
    """p* = pN / (N - p) for 1 <= p < N."""
    if not 1.0 <= p < dim:
        raise DomainError(f"p must lie in [1, {dim}), got {p}")
    return p * dim / (dim - p)


def gns_ratio(u: Union[SpectralField, np.ndarray], p: float, grid: TorusGrid,
              constant: float = 1.0) -> EstimateReport:
    """
    Gagliardo-Nirenberg-Sobolev diagnostic ||u - mean||_{p*} against C ||grad u||_p.

    The mean of every component is removed first and reported in the
    report's extra fields as ``mean_<component>``.

    Raises:
        DegenerateInputError: If grad u vanishes
    """
    p_star = sobolev_exponent(p, grid.dim)
    samples = _as_samples(u, grid)
    means = samples.mean(axis=tuple(range(1, grid.dim + 1)), keepdims=True)
    centred = samples - means
    field = transform_forward(grid, centred)
    lhs = lp_norm_samples(centred, grid, p_star)
    grad_norm = lp_norm_samples(gradient_samples(field), grid, p)
    if grad_norm <= 1.0e-14 * max(1.0, float(np.max(np.abs(samples)))):
        raise DegenerateInputError("GNS ratio undefined: the gradient vanishes")
    removed = [(f"mean_{c}", float(m)) for c, m in enumerate(means.ravel())]
    return EstimateReport.compare(lhs, constant * grad_norm,
                                  f"gns N={grid.dim} p={p:g} p*={p_star:g}", extra=removed)


def _forcing_norm(h: Trajectory, spec: NormSpec) -> float:
    norm = norm_pqT(h, spec)
    if norm == 0.0:
        raise DegenerateInputError("estimate undefined for zero forcing")
    return norm


def maximal_regularity_ratio(h: Trajectory, cfg: SolverConfig, spec: NormSpec,
                             constant: float = 1.0) -> EstimateReport:
    """
    ||Delta u||_{p,q,T} against C ||h||_{p,q,T} for the forced fractional
    Stokes problem with u(0) = 0.

    Raises:
        DegenerateInputError: For zero forcing
    """
    rhs = _forcing_norm(h, spec)
    u = solve_forced(h, cfg)
    lhs = norm_pqT(u.map_fields(laplacian), spec)
    return EstimateReport.compare(lhs, constant * rhs,
                                  f"maximal-regularity alpha={cfg.alpha:g} p={spec.p:g} q={spec.q:g}")


def forced_sobolev_ratios(h: Trajectory, cfg: SolverConfig, p: float, q: float,
                          t_end: Optional[float] = None,
                          constant: float = 1.0) -> Tuple[EstimateReport, EstimateReport]:
    """
    ||grad u||_{p,q,T} / ||h||_{p,q,T} and ||u||_{p*,q,T} / ||h||_{p,q,T}
    for the forced problem with u(0) = 0, 1 < p < N.
    """
    grid = h.grid
    if not 1.0 < p < grid.dim:
        raise DomainError(f"p must lie in (1, {grid.dim}), got {p}")
    p_star = sobolev_exponent(p, grid.dim)
    t_end = h.times.t_end if t_end is None else t_end
    rhs = _forcing_norm(h, NormSpec(p, q, t_end))
    u = solve_forced(h, cfg)
    grad_norms = np.array([lp_norm_samples(gradient_samples(u[n]), grid, p) for n in range(len(u))])
    grad_lhs = time_lq_norm(grad_norms, u.times, q, t_end)
    sobolev_lhs = norm_pqT(u, NormSpec(p_star, q, t_end))
    label = f"alpha={cfg.alpha:g} p={p:g} q={q:g}"
    return (EstimateReport.compare(grad_lhs, constant * rhs, f"forced-gradient {label}"),
            EstimateReport.compare(sobolev_lhs, constant * rhs, f"forced-sobolev {label} p*={p_star:g}"))


def uniqueness_metric(a: Trajectory, b: Trajectory, T: Optional[float] = None) -> float:
    """
    int_0^T ||a(t) - b(t)||_{L^N}^4 dt by the trapezoid rule (N = spatial dimension).

    Raises:
        GridMismatchError: If the trajectories do not share grids
    """
    difference = a - b
    T = a.times.t_end if T is None else T
    norms = difference.spatial_norms(float(a.grid.dim))
    return time_lq_norm(norms, a.times, 4.0, T) ** 4


def single_mode_forcing(grid: TorusGrid, time: TimeGrid, wavenumber: int = 1,
                        amplitude: float = 1.0) -> Trajectory:
    """Constant-in-time divergence-free forcing (0, A cos(m x_1), 0...)."""
    samples = np.zeros((grid.dim,) + grid.shape)
    samples[1] = amplitude * np.cos(wavenumber * grid.coordinates()[0])
    field = transform_forward(grid, samples, div_free=True)
    return Trajectory.from_fields(time, [field] * (time.steps + 1))


def single_mode_regularity_ratio(alpha: float, lam: float, T: float) -> float:
    """Closed-form ||Delta u||_{p,inf,T} / ||h||_{p,inf,T} for constant single-mode forcing."""
    return 1.0 - mittag_leffler(MLParams(alpha, 1.0), -lam * T ** alpha)


def random_forcing_ensemble(grid: TorusGrid, time: TimeGrid, count: int = 20, seed: int = 0,
                            band: int = 4, amplitude: float = 1.0) -> List[Trajectory]:
    """
    Random band-limited forcings h(x, t) = (1 + s sin(2 pi t / T + phase)) f(x).

    Member i draws f, s in [0, 0.5] and the phase from a child seed of seed.
    """
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    children = np.random.default_rng(seed).integers(0, 2 ** 31, size=count)
    members = []
    for child in children:
        rng = np.random.default_rng(int(child))
        spatial = random_bandlimited(grid, int(child), band, amplitude)
        strength = rng.uniform(0.0, 0.5)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        profile = 1.0 + strength * np.sin(2.0 * math.pi * time.nodes / time.t_end + phase)
        profile = profile.reshape((-1,) + (1,) * (grid.dim + 1))
        members.append(Trajectory(grid, time, profile * spatial.coefficients[np.newaxis],
                                  div_free=True))
    return members


def ensemble_ratios(forcings: Sequence[Trajectory], cfg: SolverConfig,
                    spec: NormSpec) -> List[EstimateReport]:
    """maximal_regularity_ratio over an ensemble of forcings."""
    return [maximal_regularity_ratio(h, cfg, spec) for h in forcings]
