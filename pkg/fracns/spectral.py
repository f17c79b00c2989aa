"""
Field algebra on the 2*pi-periodic torus.

Fields are stored as full complex Fourier coefficient arrays of shape
(ncomp, M, ..., M), normalised so that cos(x_1) has coefficient 1/2 at
k_1 = +-1. First-derivative symbols drop the Nyquist wavenumber so real
fields stay real; the Laplacian symbol keeps it.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np
import scipy.fft
from scipy import integrate

from .exceptions import DomainError, GridMismatchError
from .logging import get_logger
from .utils import NormSpec, TimeGrid

logger = get_logger(__name__)


@dataclass(frozen=True)
class TorusGrid:
    """
    Uniform grid on [0, 2*pi)^dim with points_per_axis points per axis.

    Attributes:
        dim: Spatial dimension (1, 2 or 3)
        points_per_axis: Even number of points M per axis
    """
    dim: int
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise DomainError(f"dim must be 1, 2 or 3, got {self.dim}")
        m = self.points_per_axis
        if int(m) != m or m < 4 or m % 2:
            raise DomainError(f"points_per_axis must be an even integer >= 4, got {m}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def axes(self) -> Tuple[int, ...]:
        """Spatial axes of a coefficient array with a leading component axis."""
        return tuple(range(1, self.dim + 1))

    @property
    def cell_volume(self) -> float:
        return (2.0 * math.pi / self.points_per_axis) ** self.dim

    @property
    def volume(self) -> float:
        return (2.0 * math.pi) ** self.dim

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers, shape (dim, M, ..., M)."""
        k1 = scipy.fft.fftfreq(self.points_per_axis, 1.0 / self.points_per_axis)
        return np.array(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def derivative_wavenumbers(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives (Nyquist entries zeroed)."""
        k = self.wavenumbers.copy()
        k[np.abs(k) == self.points_per_axis // 2] = 0.0
        return k

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """|k|^2 over all modes."""
        return np.sum(self.wavenumbers ** 2, axis=0)

    @cached_property
    def projection_symbol(self) -> np.ndarray:
        """|k|^2 built from the derivative wavenumbers, with zeros replaced by 1."""
        k2 = np.sum(self.derivative_wavenumbers ** 2, axis=0)
        return np.where(k2 == 0.0, 1.0, k2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: |k_j| < M/3 on every axis."""
        return np.all(np.abs(self.wavenumbers) < self.points_per_axis / 3.0, axis=0)

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Physical grid coordinates, one array of shape (M,)*dim per axis."""
        x1 = 2.0 * math.pi * np.arange(self.points_per_axis) / self.points_per_axis
        return tuple(np.meshgrid(*([x1] * self.dim), indexing="ij"))


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpectralField:
    """
    Fourier coefficients of a real field with ncomp components on a TorusGrid.

    Scalars have ncomp == 1, velocity fields ncomp == grid.dim. The array is
    read-only; operations always build new fields.
    """
    grid: TorusGrid
    coefficients: np.ndarray
    div_free: bool = False

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients)
        if coefficients.ndim != self.grid.dim + 1 or coefficients.shape[1:] != self.grid.shape:
            raise GridMismatchError(
                f"coefficient shape {coefficients.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coefficients", _readonly(coefficients))

    @property
    def ncomp(self) -> int:
        return self.coefficients.shape[0]

    def with_coefficients(self, coefficients: np.ndarray, div_free: bool = None) -> "SpectralField":
        return SpectralField(self.grid, coefficients,
                             self.div_free if div_free is None else div_free)

    def physical(self) -> np.ndarray:
        """Real samples on the grid, shape (ncomp, M, ..., M)."""
        return transform_inverse(self)

    def _check_compatible(self, other: "SpectralField") -> None:
        if self.grid != other.grid or self.ncomp != other.ncomp:
            raise GridMismatchError(
                f"fields on {self.grid} ({self.ncomp} comps) and {other.grid} ({other.ncomp} comps)")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.coefficients + other.coefficients,
                             self.div_free and other.div_free)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_compatible(other)
        return SpectralField(self.grid, self.coefficients - other.coefficients,
                             self.div_free and other.div_free)

    def __mul__(self, scale: float) -> "SpectralField":
        return SpectralField(self.grid, self.coefficients * float(scale), self.div_free)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self * -1.0

    def conjugate_asymmetry(self) -> float:
        """max |c(k) - conj(c(-k))|; zero for the transform of a real field."""
        axes = self.grid.axes
        mirrored = np.roll(np.flip(self.coefficients, axis=axes), 1, axis=axes)
        return float(np.max(np.abs(self.coefficients - np.conj(mirrored)), initial=0.0))

    def check_invariants(self, tol: float = 1.0e-12) -> List[str]:
        """
        Check conjugate symmetry and, for div_free fields, the divergence tag.

        Args:
            tol: Tolerance relative to max |coefficient|

        Returns:
            List of violated invariants (empty when all hold)
        """
        problems = []
        scale = max(float(np.max(np.abs(self.coefficients), initial=0.0)), 1.0e-300)
        asymmetry = self.conjugate_asymmetry()
        if asymmetry > tol * scale:
            problems.append(f"conjugate symmetry violated by {asymmetry:.3e}")
        if self.div_free:
            div = max_divergence(self)
            if div > tol * scale:
                problems.append(f"div_free field has divergence {div:.3e}")
        return problems

    def resample(self, grid: TorusGrid) -> "SpectralField":
        """
        Move the field to another resolution by zero-padding or truncation.

        Modes |k_j| >= min(M, M')/2 are dropped on every axis, Nyquist included.
        """
        if grid.dim != self.grid.dim:
            raise GridMismatchError(f"cannot resample from dim {self.grid.dim} to {grid.dim}")
        m_old, m_new = self.grid.points_per_axis, grid.points_per_axis
        limit = min(m_old, m_new) // 2
        k_old = scipy.fft.fftfreq(m_old, 1.0 / m_old).astype(int)
        src = np.nonzero(np.abs(k_old) < limit)[0]
        dst = k_old[src] % m_new
        out = np.zeros((self.ncomp,) + grid.shape, dtype=complex)
        index_src = (slice(None),) + np.ix_(*([src] * grid.dim))
        index_dst = (slice(None),) + np.ix_(*([dst] * grid.dim))
        out[index_dst] = self.coefficients[index_src]
        return SpectralField(grid, out, self.div_free)


def zeros(grid: TorusGrid, ncomp: int = None) -> SpectralField:
    """Zero field (vector by default)."""
    ncomp = grid.dim if ncomp is None else ncomp
    return SpectralField(grid, np.zeros((ncomp,) + grid.shape, dtype=complex), div_free=True)


def transform_forward(grid: TorusGrid, samples: np.ndarray, div_free: bool = False) -> SpectralField:
    """
    Forward transform of real samples.

    Args:
        grid: Target grid
        samples: Array of shape (ncomp, M, ..., M), or (M, ..., M) for a scalar
        div_free: Tag for the resulting field

    Raises:
        GridMismatchError: If the sample shape does not match the grid
        DomainError: If the samples are complex
    """
    samples = np.asarray(samples)
    if np.iscomplexobj(samples):
        raise DomainError("physical samples must be real")
    if samples.shape == grid.shape:
        samples = samples[np.newaxis]
    if samples.ndim != grid.dim + 1 or samples.shape[1:] != grid.shape:
        raise GridMismatchError(f"sample shape {samples.shape} does not match grid {grid.shape}")
    coefficients = scipy.fft.fftn(samples.astype(float), axes=grid.axes, norm="forward")
    return SpectralField(grid, coefficients, div_free)


def transform_inverse(field: SpectralField) -> np.ndarray:
    """Inverse transform; returns the real part, shape (ncomp, M, ..., M)."""
    return scipy.fft.ifftn(field.coefficients, axes=field.grid.axes, norm="forward").real


def dealias(field: SpectralField) -> SpectralField:
    """Zero every mode outside the 2/3-rule mask."""
    return field.with_coefficients(field.coefficients * field.grid.dealias_mask)


def _require_vector(field: SpectralField) -> None:
    if field.ncomp != field.grid.dim:
        raise GridMismatchError(
            f"expected a vector field with {field.grid.dim} components, got {field.ncomp}")


def _project(grid: TorusGrid, coefficients: np.ndarray) -> np.ndarray:
    k = grid.derivative_wavenumbers
    k_dot_u = np.sum(k * coefficients, axis=0)
    return coefficients - k * (k_dot_u / grid.projection_symbol)


def leray_project(u: SpectralField) -> SpectralField:
    """
    Helmholtz-Leray projection onto divergence-free fields.

    Per mode u_j - k_j (k.u) / |k|^2; the identity at k = 0, so the mean flow
    passes through.
    """
    _require_vector(u)
    return SpectralField(u.grid, _project(u.grid, u.coefficients), div_free=True)


def divergence(u: SpectralField) -> SpectralField:
    """Scalar field sum_j i k_j u_j."""
    _require_vector(u)
    div = np.sum(1j * u.grid.derivative_wavenumbers * u.coefficients, axis=0)
    return SpectralField(u.grid, div[np.newaxis])


def max_divergence(u: SpectralField) -> float:
    """max over modes of |k.u(k)|."""
    return float(np.max(np.abs(divergence(u).coefficients), initial=0.0))


def gradient(phi: SpectralField) -> SpectralField:
    """Vector field i k phi for a scalar phi."""
    if phi.ncomp != 1:
        raise GridMismatchError(f"gradient expects a scalar field, got {phi.ncomp} components")
    return SpectralField(phi.grid, 1j * phi.grid.derivative_wavenumbers * phi.coefficients[0])


def riesz_transform(field: SpectralField, j: int) -> SpectralField:
    """Apply the j-th Riesz transform (symbol i k_j/|k|, 0 at k = 0) to every component."""
    grid = field.grid
    if not 0 <= j < grid.dim:
        raise DomainError(f"Riesz index {j} outside 0..{grid.dim - 1}")
    k = grid.derivative_wavenumbers
    k2 = np.sum(k ** 2, axis=0)
    symbol = np.where(k2 == 0.0, 0.0, 1j * k[j] / np.sqrt(grid.projection_symbol))
    return field.with_coefficients(field.coefficients * symbol, div_free=False)


def apply_multiplier(field: SpectralField, symbol: np.ndarray) -> SpectralField:
    """Scale every component by a real per-mode symbol of shape (M,)*dim."""
    symbol = np.asarray(symbol, dtype=float)
    if symbol.shape != field.grid.shape:
        raise GridMismatchError(f"symbol shape {symbol.shape} does not match grid {field.grid.shape}")
    return field.with_coefficients(field.coefficients * symbol)


def laplacian(field: SpectralField) -> SpectralField:
    """Delta applied componentwise (symbol -|k|^2)."""
    return apply_multiplier(field, -field.grid.laplacian_symbol)


def _stress_transform(u: SpectralField) -> dict:
    """Transforms of the products u_j u_k for j <= k."""
    grid = u.grid
    physical = transform_inverse(u)
    products = {}
    for j in range(grid.dim):
        for k in range(j, grid.dim):
            products[(j, k)] = scipy.fft.fftn(physical[j] * physical[k], norm="forward")
    return products


def nonlinear_term(u: SpectralField) -> SpectralField:
    """
    F(u) = -P div(u (x) u), evaluated pseudospectrally and dealiased.

    The input should already be dealiased; the output is divergence-free.
    """
    _require_vector(u)
    grid = u.grid
    stress = _stress_transform(u)
    k = grid.derivative_wavenumbers
    div_stress = np.zeros((grid.dim,) + grid.shape, dtype=complex)
    for j in range(grid.dim):
        for m in range(grid.dim):
            div_stress[j] += 1j * k[m] * stress[(min(j, m), max(j, m))]
    div_stress *= grid.dealias_mask
    return SpectralField(grid, -_project(grid, div_stress), div_free=True)


def pressure_recover(u: SpectralField) -> SpectralField:
    """
    Pressure p = (-Delta)^{-1} sum_{j,k} d_j d_k (u_j u_k) with zero mean.

    Per mode p = -sum k_j k_k T_jk / |k|^2, so that grad p = -(I - P) div(u (x) u).
    """
    _require_vector(u)
    grid = u.grid
    stress = _stress_transform(u)
    k = grid.derivative_wavenumbers
    total = np.zeros(grid.shape, dtype=complex)
    for (j, m), t_jm in stress.items():
        weight = 1.0 if j == m else 2.0
        total += weight * k[j] * k[m] * t_jm
    k2 = np.sum(k ** 2, axis=0)
    pressure = np.where(k2 == 0.0, 0.0, -total / grid.projection_symbol)
    return SpectralField(grid, pressure[np.newaxis])


def inner_product(a: SpectralField, b: SpectralField) -> float:
    """Physical-space inner product int a.b dx via Parseval."""
    a._check_compatible(b)
    return float(a.grid.volume * np.sum(np.conj(a.coefficients) * b.coefficients).real)


def l2_norm(field: SpectralField) -> float:
    """L^2 norm via Parseval."""
    return math.sqrt(field.grid.volume * float(np.sum(np.abs(field.coefficients) ** 2)))


def energy(field: SpectralField) -> float:
    """Kinetic energy (1/2) ||u||_2^2."""
    return 0.5 * l2_norm(field) ** 2


def lp_norm_samples(samples: np.ndarray, grid: TorusGrid, p: float) -> float:
    """L^p norm of physical samples (ncomp, M, ...) using the Euclidean magnitude."""
    if math.isnan(p) or p < 1:
        raise DomainError(f"p must lie in [1, inf], got {p}")
    magnitude = np.sqrt(np.sum(np.asarray(samples) ** 2, axis=0))
    if math.isinf(p):
        return float(np.max(magnitude))
    return float((grid.cell_volume * np.sum(magnitude ** p)) ** (1.0 / p))


def lp_norm(field: SpectralField, p: float) -> float:
    """Spatial L^p norm by grid quadrature (p = inf takes the maximum)."""
    return lp_norm_samples(transform_inverse(field), field.grid, p)


@dataclass(frozen=True)
class Trajectory:
    """
    Fields at the nodes of a uniform TimeGrid, stored as one coefficient array
    of shape (steps + 1, ncomp, M, ..., M).
    """
    grid: TorusGrid
    times: TimeGrid
    coefficients: np.ndarray
    div_free: bool = False

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients)
        expected = (self.times.steps + 1,)
        if (coefficients.ndim != self.grid.dim + 2 or coefficients.shape[:1] != expected
                or coefficients.shape[2:] != self.grid.shape):
            raise GridMismatchError(
                f"trajectory shape {coefficients.shape} does not match "
                f"{self.times.steps + 1} nodes on grid {self.grid.shape}")
        object.__setattr__(self, "coefficients", _readonly(coefficients))

    @classmethod
    def from_fields(cls, times: TimeGrid, fields: Sequence[SpectralField]) -> "Trajectory":
        if not fields:
            raise GridMismatchError("a trajectory needs at least one field")
        grid = fields[0].grid
        for field in fields:
            fields[0]._check_compatible(field)
        return cls(grid, times, np.stack([f.coefficients for f in fields]),
                   all(f.div_free for f in fields))

    def __len__(self) -> int:
        return self.coefficients.shape[0]

    def __getitem__(self, n: int) -> SpectralField:
        return SpectralField(self.grid, self.coefficients[n], self.div_free)

    @property
    def ncomp(self) -> int:
        return self.coefficients.shape[1]

    @property
    def final(self) -> SpectralField:
        return self[len(self) - 1]

    def _check_compatible(self, other: "Trajectory") -> None:
        if (self.grid != other.grid or self.times != other.times
                or self.coefficients.shape != other.coefficients.shape):
            raise GridMismatchError("trajectories live on different grids")

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self._check_compatible(other)
        return Trajectory(self.grid, self.times, self.coefficients - other.coefficients,
                          self.div_free and other.div_free)

    def __mul__(self, scale: float) -> "Trajectory":
        return Trajectory(self.grid, self.times, self.coefficients * float(scale), self.div_free)

    __rmul__ = __mul__

    def map_fields(self, func) -> "Trajectory":
        """Apply a field-to-field function at every node."""
        return Trajectory.from_fields(self.times, [func(self[n]) for n in range(len(self))])

    def spatial_norms(self, p: float) -> np.ndarray:
        """Spatial L^p norm at every node."""
        physical = scipy.fft.ifftn(self.coefficients, axes=tuple(range(2, self.grid.dim + 2)),
                                   norm="forward").real
        return np.array([lp_norm_samples(physical[n], self.grid, p) for n in range(len(self))])


def time_lq_norm(values: np.ndarray, times: TimeGrid, q: float, t_end: float) -> float:
    """
    L^q norm over [0, t_end] of nonnegative samples at the nodes of times.

    Trapezoid rule on |f|^q; a partial last interval uses linear interpolation of f.
    """
    values = np.abs(np.asarray(values, dtype=float))
    if t_end > times.t_end * (1.0 + 1.0e-12):
        raise DomainError(f"t_end={t_end} exceeds the trajectory end time {times.t_end}")
    nodes = times.nodes
    last = min(int(np.searchsorted(nodes, t_end, side="right")) - 1, times.steps)
    t = nodes[:last + 1]
    f = values[:last + 1]
    if t_end - t[-1] > 1.0e-12 * times.t_end:
        fraction = (t_end - t[-1]) / times.dt
        f = np.append(f, (1.0 - fraction) * values[last] + fraction * values[last + 1])
        t = np.append(t, t_end)
    if math.isinf(q):
        return float(np.max(f))
    if t.size < 2:
        return 0.0
    return float(integrate.trapezoid(f ** q, t) ** (1.0 / q))


def norm_pqT(traj: Trajectory, spec: NormSpec) -> float:
    """
    Mixed norm ||h||_{p,q,T}: L^q in time over [0, T] of the spatial L^p norm.

    Raises:
        DomainError: If spec.t_end exceeds the trajectory's end time
    """
    return time_lq_norm(traj.spatial_norms(spec.p), traj.times, spec.q, spec.t_end)
