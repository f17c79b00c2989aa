"""
Fractional calculus on sampled time signals, and the fractional Laplacian.

Time operators integrate the weakly singular kernel (t - tau)^(alpha-1)
exactly against piecewise-linear interpolants of the samples.
"""

import math
from typing import Callable

import numpy as np

from .exceptions import DomainError
from .logging import get_logger
from .spectral import SpectralField, apply_multiplier
from .specfun import checked_quad, gamma_fn
from .utils import SampledSignal

logger = get_logger(__name__)


def _check_order(alpha: float, closed_right: bool) -> None:
    upper_ok = alpha <= 1.0 if closed_right else alpha < 1.0
    if not (math.isfinite(alpha) and alpha > 0.0 and upper_ok):
        interval = "(0, 1]" if closed_right else "(0, 1)"
        raise DomainError(f"alpha must lie in {interval}, got {alpha}")


def product_integration_weights(nodes: np.ndarray, n: int, alpha: float) -> np.ndarray:
    """
    Weights w_k with int_{s_0}^{s_n} (s_n - s)^(alpha-1) h(s) ds = sum_k w_k h(s_k)
    for h piecewise linear on increasing nodes s_0 < ... < s_n.

    Args:
        nodes: Increasing node positions (only nodes[:n+1] are used)
        n: Index of the upper limit
        alpha: Kernel exponent, alpha > 0

    Returns:
        Array of n + 1 weights (all zero for n = 0)
    """
    weights = np.zeros(n + 1)
    if n == 0:
        return weights
    s = np.asarray(nodes[:n + 1], dtype=float)
    left, right = s[:-1], s[1:]
    width = right - left
    if np.any(width <= 0):
        raise DomainError("product-integration nodes must be strictly increasing")
    upper = s[n] - left
    lower = np.maximum(s[n] - right, 0.0)
    i0 = (upper ** alpha - lower ** alpha) / alpha
    i1 = upper * i0 - (upper ** (alpha + 1.0) - lower ** (alpha + 1.0)) / (alpha + 1.0)
    weights[:-1] += i0 - i1 / width
    weights[1:] += i1 / width
    return weights


def rl_integral(h: SampledSignal, alpha: float) -> SampledSignal:
    """
    Riemann-Liouville integral I^alpha h at every grid node.

    Exact for piecewise-linear h; alpha = 1 reduces to the cumulative
    trapezoid rule.

    Raises:
        DomainError: For alpha outside (0, 1]
    """
    _check_order(alpha, closed_right=True)
    nodes = h.grid.nodes
    values = np.zeros(h.grid.steps + 1)
    for n in range(1, h.grid.steps + 1):
        values[n] = product_integration_weights(nodes, n, alpha) @ h.values[:n + 1]
    return SampledSignal(h.grid, values / gamma_fn(alpha))


def l1_coefficients(alpha: float, count: int) -> np.ndarray:
    """b_j = (j+1)^(1-alpha) - j^(1-alpha) for j = 0..count-1."""
    j = np.arange(count, dtype=float)
    return (j + 1.0) ** (1.0 - alpha) - j ** (1.0 - alpha)


def caputo_derivative(h: SampledSignal, alpha: float) -> SampledSignal:
    """
    Caputo derivative by the L1 scheme.

    D^alpha h(t_n) = dt^(-alpha) / Gamma(2-alpha) * sum_{k<n} b_{n-1-k} (h_{k+1} - h_k),
    exact for piecewise-linear h; the value at t_0 is 0.

    Raises:
        DomainError: For alpha outside (0, 1)
    """
    _check_order(alpha, closed_right=False)
    steps = h.grid.steps
    increments = np.diff(h.values)
    history = np.convolve(l1_coefficients(alpha, steps), increments)[:steps]
    scale = h.grid.dt ** (-alpha) / gamma_fn(2.0 - alpha)
    return SampledSignal(h.grid, np.concatenate(([0.0], scale * history)))


def frac_laplacian_constant(N: int, s: float) -> float:
    """C(N, s) = 2^(2s) s Gamma(s + N/2) / (pi^(N/2) Gamma(1 - s))."""
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    if not (math.isfinite(s) and 0.0 < s < 1.0):
        raise DomainError(f"s must lie in (0, 1), got {s}")
    return (4.0 ** s * s * gamma_fn(s + N / 2.0)
            / (math.pi ** (N / 2.0) * gamma_fn(1.0 - s)))


def frac_laplacian_apply(u: SpectralField, s: float) -> SpectralField:
    """
    (-Delta)^s as the multiplier |k|^(2s); the zero mode maps to zero.

    s = 1 gives -Delta.
    """
    if not (math.isfinite(s) and 0.0 < s <= 1.0):
        raise DomainError(f"s must lie in (0, 1], got {s}")
    return apply_multiplier(u, u.grid.laplacian_symbol ** s)


def singular_integral_laplacian_1d(func: Callable[[float], float], x: float, s: float,
                                   periods: int = 64, tol: float = 1.0e-10) -> float:
    """
    Reference value of (-Delta)^s f(x) for a 2*pi-periodic f from the
    principal-value integral, written with symmetric pairing:

        C(1, s) int_0^inf (2 f(x) - f(x + r) - f(x - r)) / r^(1 + 2s) dr

    The integral is summed period by period up to R = 2*pi*periods; beyond R
    the pairing averages to 2 (f(x) - mean f) and is added in closed form.
    """
    if int(periods) != periods or periods < 1:
        raise DomainError(f"periods must be a positive integer, got {periods}")
    constant = frac_laplacian_constant(1, s)
    fx = func(x)
    period = 2.0 * math.pi

    def pairing(r: float) -> float:
        return 2.0 * fx - func(x + r) - func(x - r)

    def smooth_head(r: float) -> float:
        # pairing(r) / r^2 is smooth; below 1e-4 it is frozen to avoid cancellation
        r = max(r, 1.0e-4)
        return pairing(r) / (r * r)

    total = checked_quad(smooth_head, 0.0, period, epsabs=tol,
                         weight="alg", wvar=(1.0 - 2.0 * s, 0.0))
    for m in range(1, periods):
        total += checked_quad(lambda r: pairing(r) / r ** (1.0 + 2.0 * s),
                              m * period, (m + 1) * period, epsabs=tol)

    mean = checked_quad(func, 0.0, period, epsabs=tol) / period
    radius = periods * period
    total += 2.0 * (fx - mean) * radius ** (-2.0 * s) / (2.0 * s)
    return constant * total
