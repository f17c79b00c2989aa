"""
Binary snapshot format for velocity fields.

Layout (little-endian):

    magic    4 bytes   b"FRNS"
    version  uint16    1
    dim      uint16    spatial dimension N
    points   uint32    points per axis M
    time     float64   snapshot time
    data     complex128[N, M, ..., M]   component-major Fourier coefficients
                                         (real part then imaginary part, float64 each)

Coefficients use the normalisation of fracns.spectral.
"""

from pathlib import Path
from typing import List, Tuple

import numpy as np

from .exceptions import FieldFormatError
from .logging import get_logger
from .spectral import SpectralField, TorusGrid, Trajectory

logger = get_logger(__name__)

MAGIC = b"FRNS"
VERSION = 1
HEADER = np.dtype([("magic", "S4"), ("version", "<u2"), ("dim", "<u2"),
                   ("points", "<u4"), ("time", "<f8")])


def encode_field(field: SpectralField, time: float = 0.0) -> bytes:
    """Serialise a vector field to the snapshot byte layout."""
    grid = field.grid
    if field.ncomp != grid.dim:
        raise FieldFormatError(
            f"snapshots hold vector fields with {grid.dim} components, got {field.ncomp}")
    header = np.zeros(1, dtype=HEADER)
    header[0] = (MAGIC, VERSION, grid.dim, grid.points_per_axis, float(time))
    return header.tobytes() + field.coefficients.astype("<c16").tobytes()


def decode_field(payload: bytes, div_free: bool = False) -> Tuple[SpectralField, float]:
    """
    Parse snapshot bytes.

    Returns:
        (field, time)

    Raises:
        FieldFormatError: On a bad magic, unsupported version or wrong length
    """
    if len(payload) < HEADER.itemsize:
        raise FieldFormatError(f"snapshot too short for a header ({len(payload)} bytes)")
    header = np.frombuffer(payload[:HEADER.itemsize], dtype=HEADER)[0]
    if bytes(header["magic"]) != MAGIC:
        raise FieldFormatError(f"bad magic {bytes(header['magic'])!r}")
    if int(header["version"]) != VERSION:
        raise FieldFormatError(f"unsupported snapshot version {int(header['version'])}")
    dim, points = int(header["dim"]), int(header["points"])
    try:
        grid = TorusGrid(dim, points)
    except ValueError as exc:
        raise FieldFormatError(f"invalid grid in header: {exc}") from exc
    expected = dim * points ** dim * 16
    body = payload[HEADER.itemsize:]
    if len(body) != expected:
        raise FieldFormatError(f"snapshot body has {len(body)} bytes, expected {expected}")
    coefficients = np.frombuffer(body, dtype="<c16").reshape((dim,) + grid.shape)
    return SpectralField(grid, coefficients.astype(complex), div_free), float(header["time"])


def write_field(path: Path, field: SpectralField, time: float = 0.0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_field(field, time))
    return path


def read_field(path: Path, div_free: bool = False) -> Tuple[SpectralField, float]:
    """Read a snapshot file; raises FieldFormatError when malformed."""
    path = Path(path)
    if not path.is_file():
        raise FieldFormatError(f"snapshot file not found: {path}")
    return decode_field(path.read_bytes(), div_free)


def write_snapshots(directory: Path, trajectory: Trajectory, every: int = 0,
                    prefix: str = "field") -> List[Path]:
    """
    Write trajectory snapshots as <prefix>_<step>.bin.

    every = 0 writes only the first and last nodes.
    """
    last = len(trajectory) - 1
    steps = sorted({0, last}) if every <= 0 else sorted(set(range(0, last + 1, every)) | {last})
    width = len(str(last))
    paths = []
    for n in steps:
        name = f"{prefix}_{n:0{width}d}.bin"
        paths.append(write_field(Path(directory) / name, trajectory[n], trajectory.times.nodes[n]))
    logger.debug("wrote %d snapshots to %s", len(paths), directory)
    return paths
