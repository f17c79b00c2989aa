"""
Utility value types and output helpers shared across fracns modules.
"""

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import DomainError, GridMismatchError

# Relative slack used when deciding whether an estimate holds.
HOLDS_SLACK = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t_k = k*T/n on [0, T]."""
    t_end: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise DomainError(f"t_end must be positive and finite, got {self.t_end}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def __len__(self) -> int:
        return self.steps + 1


@dataclass(frozen=True)
class SampledSignal:
    """Real signal sampled at the nodes of a TimeGrid."""
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.steps + 1:
            raise GridMismatchError(
                f"signal has {values.size} samples, grid expects {self.grid.steps + 1}")
        if not np.all(np.isfinite(values)):
            raise DomainError("signal values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, func) -> "SampledSignal":
        """Sample a vectorised callable at the grid nodes."""
        return cls(grid, np.asarray(func(grid.nodes), dtype=float) * np.ones(grid.steps + 1))

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes


@dataclass(frozen=True)
class NormSpec:
    """Selects the mixed norm ||h||_{p,q,T} (L^q in time of L^p in space)."""
    p: float
    q: float
    t_end: float

    def __post_init__(self):
        for name in ("p", "q"):
            value = getattr(self, name)
            if math.isnan(value) or value < 1:
                raise DomainError(f"norm exponent {name} must lie in [1, inf], got {value}")
        if not self.t_end > 0:
            raise DomainError(f"t_end must be positive, got {self.t_end}")


@dataclass(frozen=True)
class EstimateRow:
    """One time node of an estimate report."""
    t: float
    lhs: float
    rhs: float
    ratio: float
    holds: bool
    extra: Tuple[Tuple[str, float], ...] = ()


@dataclass(frozen=True)
class EstimateReport:
    """Outcome of an inequality check: lhs <= rhs, with the ratio lhs/rhs."""
    lhs: float
    rhs: float
    ratio: float
    holds: bool
    context: str
    rows: Tuple[EstimateRow, ...] = ()
    extra: Tuple[Tuple[str, float], ...] = ()

    @classmethod
    def compare(cls, lhs: float, rhs: float, context: str,
                rows: Sequence[EstimateRow] = (),
                extra: Sequence[Tuple[str, float]] = ()) -> "EstimateReport":
        """Build a report whose holds flag is lhs <= rhs*(1+slack)."""
        return cls(lhs=float(lhs), rhs=float(rhs), ratio=safe_ratio(lhs, rhs),
                   holds=bool(lhs <= rhs * (1.0 + HOLDS_SLACK)),
                   context=context, rows=tuple(rows),
                   extra=tuple((name, float(value)) for name, value in extra))


@dataclass
class RunResult:
    """Complete result of one experiment run."""
    success: bool
    experiment: str
    output_dir: Optional[Path]
    artifacts: List[Path]
    statistics: Dict[str, Any]
    warnings: List[str]
    errors: List[str]
    processing_time: float
    exit_code: int = 0


def safe_ratio(lhs: float, rhs: float) -> float:
    """lhs/rhs with 0/0 = 0 and x/0 = inf."""
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return float(lhs) / float(rhs)


def format_value(value: Any) -> str:
    """Deterministic text for CSV cells; floats use the shortest round-trip repr."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """
    Write a CSV file with deterministic number formatting.

    Args:
        path: Output file path (parent directories are created)
        header: Column names
        rows: Row sequences, one value per column

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} values, header has {len(header)}")
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv_columns(path: Path) -> Dict[str, np.ndarray]:
    """Read a numeric CSV file with a header row into named float columns."""
    with Path(path).open(newline="") as handle:
        reader = csv.reader(handle)
        header = [name.strip() for name in next(reader)]
        rows = [[float(cell) for cell in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def sha256_of_file(path: Path) -> str:
    """Hex SHA-256 digest of a file."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def report_rows(report: EstimateReport) -> List[List[Any]]:
    """CSV rows (context, t, lhs, rhs, ratio, holds) for a report."""
    if not report.rows:
        return [[report.context, float("nan"), report.lhs, report.rhs, report.ratio, report.holds]]
    return [[report.context, row.t, row.lhs, row.rhs, row.ratio, row.holds] for row in report.rows]
