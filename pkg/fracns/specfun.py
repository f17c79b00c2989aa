"""
Special functions behind the fractional propagators.

Gamma, the two-parameter Mittag-Leffler function E_{alpha,beta} on the real
axis (the hot path is the negative axis), the Mainardi function M_alpha and
its moments on the positive half line.

E_{alpha,beta}(-x) for 0 < alpha < 1 is evaluated on three branches chosen by
the size of x**(1/alpha):

* Taylor series for small x,
* a real integral representation for intermediate x,
* the optimally truncated asymptotic expansion for large x.

alpha = 1 uses closed forms.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate, special

from .exceptions import ConvergenceError, DomainError, QuadratureError
from .logging import get_logger

logger = get_logger(__name__)

# The largest Taylor term of E(-x) grows like exp(x**(1/alpha)); the truncated
# asymptotic error decays like exp(-x**(1/alpha)).
SERIES_EXPONENT_LIMIT = 4.0
ASYMPTOTIC_EXPONENT_START = 36.0

# Mainardi series is used on [0, MAINARDI_SERIES_RADIUS].
MAINARDI_SERIES_RADIUS = 1.0

# quad may report trouble while still meeting the tolerance by this factor.
QUAD_SLACK = 1.0e4

_POLE_SNAP = 1.0e-12


@dataclass(frozen=True)
class MLParams:
    """Parameters (alpha, beta) of E_{alpha,beta}."""
    alpha: float
    beta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (math.isfinite(self.beta) and 0.0 < self.beta <= 2.0):
            raise DomainError(f"beta must lie in (0, 2], got {self.beta}")


@dataclass(frozen=True)
class EvalPolicy:
    """
    Evaluation controls shared by the special functions.

    Attributes:
        series_cutoff_radius: Upper bound for the Taylor branch on the negative axis
        target_abs_tol: Absolute tolerance for series truncation and quadrature
        max_terms: Series length after which evaluation gives up
        z_max: Largest positive argument accepted by mittag_leffler
    """
    series_cutoff_radius: float = 10.0
    target_abs_tol: float = 1.0e-14
    max_terms: int = 2000
    z_max: float = 10.0

    def __post_init__(self):
        if not self.target_abs_tol > 0:
            raise DomainError(f"target_abs_tol must be positive, got {self.target_abs_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms}")
        if not self.series_cutoff_radius > 0:
            raise DomainError(
                f"series_cutoff_radius must be positive, got {self.series_cutoff_radius}")
        if not (math.isfinite(self.z_max) and self.z_max >= 0):
            raise DomainError(f"z_max must be finite and nonnegative, got {self.z_max}")


DEFAULT_POLICY = EvalPolicy()


def gamma_fn(x: float) -> float:
    """
    Gamma function on the positive real axis.

    Raises:
        DomainError: If x is not a positive finite number or Gamma(x) overflows
    """
    x = float(x)
    if not (math.isfinite(x) and x > 0):
        raise DomainError(f"gamma_fn requires a positive finite argument, got {x}")
    value = float(special.gamma(x))
    if not math.isfinite(value):
        raise DomainError(f"Gamma({x}) overflows double precision")
    return value


def _rgamma(a: float) -> float:
    """1/Gamma(a), exactly zero at (numerically) nonpositive integers."""
    nearest = round(a)
    if nearest <= 0 and abs(a - nearest) < _POLE_SNAP * max(1.0, abs(a)):
        return 0.0
    return float(special.rgamma(a))


def checked_quad(func: Callable[[float], float], a: float, b: float, epsabs: float,
                 epsrel: float = 1.0e-12, limit: int = 200, **kwargs) -> float:
    """scipy quad wrapper that turns unmet tolerances into QuadratureError."""
    result = integrate.quad(func, a, b, full_output=1, epsabs=epsabs,
                            epsrel=epsrel, limit=limit, **kwargs)
    value, abserr = float(result[0]), float(result[1])
    if not math.isfinite(value):
        raise QuadratureError(f"quadrature on [{a}, {b}] produced {value}")
    if len(result) > 3 and abserr > QUAD_SLACK * max(epsabs, epsrel * abs(value)):
        raise QuadratureError(
            f"quadrature on [{a}, {b}] stalled (error estimate {abserr:.3e}): {result[3]}")
    return value


def branch_radii(alpha: float, policy: EvalPolicy = DEFAULT_POLICY) -> Tuple[float, float]:
    """
    Radii (r_series, r_asymptotic) splitting the negative axis for E_{alpha,beta}(-x).

    x <= r_series uses the Taylor series, x >= r_asymptotic the asymptotic
    expansion, and the integral representation covers the gap. For alpha = 1
    closed forms are used everywhere and both radii are infinite.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return math.inf, math.inf
    r_series = min(policy.series_cutoff_radius, SERIES_EXPONENT_LIMIT ** alpha)
    r_asymptotic = max(ASYMPTOTIC_EXPONENT_START ** alpha, r_series)
    return r_series, r_asymptotic


def mittag_leffler_series(alpha: float, beta: float, z: float,
                          policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """
    Taylor series sum_k z^k / Gamma(alpha*k + beta) with exact-rounding summation.

    Raises:
        ConvergenceError: If max_terms is exhausted or the terms overflow
    """
    if z == 0.0:
        return float(special.rgamma(beta))
    log_x = math.log(abs(z))
    alternating = z < 0
    terms = []
    running = 0.0
    previous = math.inf
    for k in range(policy.max_terms):
        log_mag = k * log_x - special.gammaln(alpha * k + beta)
        if log_mag > 700.0:
            raise ConvergenceError(
                f"Mittag-Leffler series overflows at z={z} (alpha={alpha}, beta={beta})")
        mag = math.exp(log_mag)
        term = -mag if (alternating and k % 2) else mag
        terms.append(term)
        running += term
        if mag < previous and mag <= 1.0e-3 * max(policy.target_abs_tol,
                                                 np.finfo(float).eps * abs(running)):
            return math.fsum(terms)
        previous = mag
    raise ConvergenceError(
        f"Mittag-Leffler series did not converge in {policy.max_terms} terms "
        f"(alpha={alpha}, beta={beta}, z={z})")


def mittag_leffler_asymptotic(alpha: float, beta: float, x: float,
                              policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """
    E_{alpha,beta}(-x) from sum_{k>=1} (-1)^(k+1) x^(-k) / Gamma(beta - alpha*k).

    Truncated just before the envelope Gamma(alpha*k+1-beta) x^(-k) starts to grow.
    """
    if not x > 0:
        raise DomainError(f"asymptotic branch needs x > 0, got {x}")
    log_x = math.log(x)
    stop = math.log(1.0e-3 * policy.target_abs_tol)
    terms = []
    previous_envelope = math.inf
    for k in range(1, policy.max_terms + 1):
        shift = alpha * k + 1.0 - beta
        if shift > 0:
            log_envelope = special.gammaln(shift) - k * log_x
            if log_envelope > previous_envelope:
                return math.fsum(terms)
            previous_envelope = log_envelope
        coefficient = _rgamma(beta - alpha * k)
        if coefficient != 0.0:
            sign = 1.0 if k % 2 else -1.0
            terms.append(sign * coefficient * math.exp(-k * log_x))
        if shift > 0 and previous_envelope < stop:
            return math.fsum(terms)
    raise ConvergenceError(
        f"asymptotic expansion did not reach its optimal truncation in "
        f"{policy.max_terms} terms (alpha={alpha}, beta={beta}, x={x})")


@lru_cache(maxsize=1 << 16)
def _ml_integral_cached(alpha: float, beta: float, x: float, tol: float) -> float:
    cos_a = math.cos(alpha * math.pi)
    sin_b = math.sin(math.pi * (1.0 - beta))
    sin_ab = math.sin(math.pi * (1.0 - beta + alpha))

    def density(r: float) -> float:
        ra = r ** alpha
        return (math.exp(-r) * (ra * sin_b + x * sin_ab)
                / (math.pi * (ra * ra + 2.0 * x * ra * cos_a + x * x)))

    # r^(alpha-beta) is singular at 0 when beta > alpha
    head = checked_quad(density, 0.0, 1.0, epsabs=tol, weight="alg", wvar=(alpha - beta, 0.0))

    peak = (-x * cos_a) ** (1.0 / alpha) if cos_a < 0 else 0.0
    upper = max(peak, 1.0) + 50.0
    points = [peak] if 1.0 < peak < upper else None
    tail = checked_quad(lambda r: r ** (alpha - beta) * density(r), 1.0, upper,
                 epsabs=tol, points=points)
    return head + tail


def mittag_leffler_integral(alpha: float, beta: float, x: float,
                            policy: EvalPolicy = DEFAULT_POLICY) -> float:
    """
    E_{alpha,beta}(-x) for 0 < alpha < 1 from its real integral representation.

    The representation needs beta < 1 + alpha; larger beta is lowered with
    E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z.

    Raises:
        QuadratureError: If the adaptive quadrature stalls
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"integral branch needs 0 < alpha < 1, got {alpha}")
    if not x > 0:
        raise DomainError(f"integral branch needs x > 0, got {x}")
    if beta >= 1.0 + alpha:
        lowered = mittag_leffler_integral(alpha, beta - alpha, x, policy)
        return (lowered - _rgamma(beta - alpha)) / (-x)
    return _ml_integral_cached(float(alpha), float(beta), float(x), policy.target_abs_tol)


def _ml_alpha_one(beta: float, z: float, policy: EvalPolicy) -> float:
    if beta == 1.0:
        return math.exp(z)
    if beta == 2.0:
        return math.expm1(z) / z
    if beta > 1.0:
        integral = checked_quad(lambda t: math.exp(z * t), 0.0, 1.0, epsabs=policy.target_abs_tol,
                                weight="alg", wvar=(0.0, beta - 2.0))
        return integral * _rgamma(beta - 1.0)
    return _rgamma(beta) + z * _ml_alpha_one(beta + 1.0, z, policy)


def _ml_dispatch(alpha: float, beta: float, z: float, policy: EvalPolicy) -> float:
    if z == 0.0:
        return float(special.rgamma(beta))
    if alpha == 1.0:
        return _ml_alpha_one(beta, z, policy)
    if z > 0:
        return mittag_leffler_series(alpha, beta, z, policy)
    x = -z
    r_series, r_asymptotic = branch_radii(alpha, policy)
    if x <= r_series:
        return mittag_leffler_series(alpha, beta, z, policy)
    if x >= r_asymptotic:
        return mittag_leffler_asymptotic(alpha, beta, x, policy)
    return mittag_leffler_integral(alpha, beta, x, policy)


def _check_argument(z: float, policy: EvalPolicy) -> float:
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"Mittag-Leffler argument must be finite, got {z}")
    if z > policy.z_max:
        raise DomainError(f"Mittag-Leffler argument {z} exceeds z_max={policy.z_max}")
    return z


def mittag_leffler(params: MLParams, z: float, policy: Optional[EvalPolicy] = None) -> float:
    """
    Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z <= z_max.

    Args:
        params: alpha in (0, 1], beta in (0, 2]
        z: Real argument; the main operating domain is z <= 0
        policy: Evaluation controls (defaults to DEFAULT_POLICY)

    Returns:
        E_{alpha,beta}(z)

    Raises:
        DomainError: For non-finite z or z > policy.z_max
        ConvergenceError: If a series exhausts max_terms or the value is not finite
    """
    policy = policy or DEFAULT_POLICY
    z = _check_argument(z, policy)
    value = _ml_dispatch(params.alpha, params.beta, z, policy)
    if not math.isfinite(value):
        raise ConvergenceError(
            f"E_{{{params.alpha},{params.beta}}}({z}) is not finite in double precision")
    return value


def mittag_leffler_values(params: MLParams, z: np.ndarray,
                          policy: Optional[EvalPolicy] = None) -> np.ndarray:
    """
    Evaluate E_{alpha,beta} over an array, once per distinct argument.

    Returns an array of the same shape as z.
    """
    policy = policy or DEFAULT_POLICY
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("Mittag-Leffler arguments must be finite")
    if z.size and z.max() > policy.z_max:
        raise DomainError(f"Mittag-Leffler argument {z.max()} exceeds z_max={policy.z_max}")

    alpha, beta = params.alpha, params.beta
    if alpha == 1.0 and beta == 1.0:
        return np.exp(z)
    if alpha == 1.0 and beta == 2.0:
        safe = np.where(z == 0.0, 1.0, z)
        return np.where(z == 0.0, 1.0, np.expm1(z) / safe)

    unique, inverse = np.unique(z, return_inverse=True)
    values = np.array([_ml_dispatch(alpha, beta, float(u), policy) for u in unique])
    if not np.all(np.isfinite(values)):
        raise ConvergenceError(f"non-finite E_{{{alpha},{beta}}} values")
    logger.debug("evaluated E_{%g,%g} at %d distinct arguments", alpha, beta, unique.size)
    return values[inverse].reshape(z.shape)


def _check_mainardi_alpha(alpha: float) -> None:
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise DomainError(f"Mainardi function needs 0 < alpha < 1, got {alpha}")


def _mainardi_series(alpha: float, theta: float, policy: EvalPolicy) -> float:
    if theta == 0.0:
        return _rgamma(1.0 - alpha)
    log_theta = math.log(theta)
    terms = []
    for n in range(policy.max_terms):
        log_mag = n * log_theta - special.gammaln(n + 1.0)
        term = math.exp(log_mag) * _rgamma(1.0 - alpha - alpha * n)
        if n % 2:
            term = -term
        terms.append(term)
        # |1/Gamma(-y)| <= Gamma(y+1)/pi bounds the remaining terms
        envelope = log_mag + special.gammaln(alpha * n + alpha) - math.log(math.pi)
        if n > 1 and envelope < math.log(1.0e-3 * policy.target_abs_tol):
            return math.fsum(terms)
    raise ConvergenceError(
        f"Mainardi series did not converge in {policy.max_terms} terms (alpha={alpha}, theta={theta})")


def _mainardi_integral(alpha: float, theta: float, policy: EvalPolicy) -> float:
    inv = 1.0 / (1.0 - alpha)
    scale = theta ** inv
    at_zero = alpha ** (alpha * inv) * (1.0 - alpha)

    def shape(phi: float) -> float:
        if phi <= 0.0:
            return at_zero
        return (math.sin(alpha * phi) ** (alpha * inv) * math.sin((1.0 - alpha) * phi)
                / math.sin(phi) ** inv)

    def integrand(phi: float) -> float:
        a = shape(phi)
        exponent = scale * a
        if not math.isfinite(exponent) or exponent > 745.0:
            return 0.0
        return a * math.exp(-exponent)

    integral = checked_quad(integrand, 0.0, math.pi, epsabs=policy.target_abs_tol)
    return theta ** (alpha * inv) * integral / (math.pi * (1.0 - alpha))


def mainardi(alpha: float, theta: float, policy: Optional[EvalPolicy] = None) -> float:
    """
    Mainardi function M_alpha(theta) = sum_n (-theta)^n / (n! Gamma(1 - alpha - alpha*n)).

    The series is used for theta <= 1; larger theta use the integral
    representation over [0, pi], which is positive term by term.

    Args:
        alpha: Order in (0, 1)
        theta: Nonnegative argument
        policy: Evaluation controls

    Returns:
        M_alpha(theta) >= 0

    Raises:
        DomainError: For alpha outside (0, 1) or negative theta
        ConvergenceError: If the series exhausts max_terms
    """
    policy = policy or DEFAULT_POLICY
    _check_mainardi_alpha(alpha)
    theta = float(theta)
    if not (math.isfinite(theta) and theta >= 0.0):
        raise DomainError(f"Mainardi argument must be finite and nonnegative, got {theta}")
    if theta <= MAINARDI_SERIES_RADIUS:
        return _mainardi_series(alpha, theta, policy)
    return _mainardi_integral(alpha, theta, policy)


def _mainardi_cutoff(alpha: float, r: float, closed_form: float, policy: EvalPolicy) -> float:
    """Truncation point beyond which t^r M_alpha(t) no longer contributes."""
    upper = 4.0
    while upper < 1.0e4:
        if upper ** (r + 1.0) * mainardi(alpha, upper, policy) < 1.0e-14 * closed_form:
            return upper
        upper *= 1.5
    raise QuadratureError(f"no truncation point found for the Mainardi moment (alpha={alpha}, r={r})")


def mainardi_moment(alpha: float, r: float,
                    policy: Optional[EvalPolicy] = None) -> Tuple[float, float]:
    """
    Moment int_0^inf t^r M_alpha(t) dt by quadrature, with its closed form.

    Returns:
        (numeric, closed_form) where closed_form = Gamma(r+1) / Gamma(alpha*r + 1)

    Raises:
        QuadratureError: If adaptive refinement stalls
    """
    policy = policy or DEFAULT_POLICY
    _check_mainardi_alpha(alpha)
    r = float(r)
    if not (math.isfinite(r) and r > -1.0):
        raise DomainError(f"moment order must exceed -1, got {r}")

    closed_form = math.exp(special.gammaln(r + 1.0) - special.gammaln(alpha * r + 1.0))
    upper = _mainardi_cutoff(alpha, r, closed_form, policy)

    def density(t: float) -> float:
        return mainardi(alpha, t, policy)

    head = checked_quad(density, 0.0, 1.0, epsabs=1.0e-13, epsrel=1.0e-10,
                 weight="alg", wvar=(r, 0.0))
    tail = checked_quad(lambda t: t ** r * density(t), 1.0, upper, epsabs=1.0e-13,
                 epsrel=1.0e-10, limit=500)
    numeric = head + tail
    logger.debug("Mainardi moment alpha=%g r=%g: numeric=%.15g closed=%.15g",
                 alpha, r, numeric, closed_form)
    return numeric, closed_form
