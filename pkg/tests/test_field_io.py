"""Tests for the binary field snapshot format."""

import struct

import numpy as np
import pytest

from fracns.exceptions import FieldFormatError
from fracns.field_io import (HEADER, MAGIC, decode_field, encode_field, read_field, write_field,
                             write_snapshots)
from fracns.spectral import SpectralField, Trajectory
from fracns.utils import TimeGrid


class TestSnapshotLayout:
    """Byte layout of a snapshot."""

    def test_header_layout(self, random16):
        payload = encode_field(random16, time=0.25)
        assert HEADER.itemsize == 20
        assert payload[:4] == MAGIC
        version, dim, points, time = struct.unpack("<HHId", payload[4:20])
        assert (version, dim, points, time) == (1, 2, 16, 0.25)
        assert len(payload) == 20 + 2 * 16 * 16 * 16

    def test_body_is_little_endian_complex(self, random16):
        payload = encode_field(random16)
        first = struct.unpack("<dd", payload[20:36])
        coefficient = random16.coefficients[0, 0, 0]
        assert first == (coefficient.real, coefficient.imag)

    def test_file_round_trip(self, random16, temp_output_dir):
        path = write_field(temp_output_dir / "nested" / "u.bin", random16, time=1.5)
        field, time = read_field(path, div_free=True)
        assert time == 1.5
        assert field.grid == random16.grid
        assert field.div_free
        assert np.array_equal(field.coefficients, random16.coefficients)


class TestMalformedSnapshots:
    """Every malformed payload raises FieldFormatError."""

    def test_bad_magic(self, random16):
        payload = bytearray(encode_field(random16))
        payload[:4] = b"XXXX"
        with pytest.raises(FieldFormatError, match="magic"):
            decode_field(bytes(payload))

    def test_unsupported_version(self, random16):
        payload = bytearray(encode_field(random16))
        payload[4:6] = struct.pack("<H", 2)
        with pytest.raises(FieldFormatError, match="version"):
            decode_field(bytes(payload))

    def test_truncated_body(self, random16):
        with pytest.raises(FieldFormatError):
            decode_field(encode_field(random16)[:-8])

    def test_short_header(self):
        with pytest.raises(FieldFormatError):
            decode_field(b"FRNS")

    def test_invalid_grid(self, random16):
        payload = bytearray(encode_field(random16))
        payload[8:12] = struct.pack("<I", 7)
        with pytest.raises(FieldFormatError, match="grid"):
            decode_field(bytes(payload))

    def test_missing_file(self, temp_output_dir):
        with pytest.raises(FieldFormatError):
            read_field(temp_output_dir / "absent.bin")

    def test_scalar_fields_rejected(self, random16):
        scalar = SpectralField(random16.grid, random16.coefficients[:1])
        with pytest.raises(FieldFormatError):
            encode_field(scalar)


class TestSnapshots:
    """Trajectory snapshot selection."""

    def _trajectory(self, field, steps):
        return Trajectory.from_fields(TimeGrid(1.0, steps), [field * (1.0 + n) for n in range(steps + 1)])

    def test_first_and_last_by_default(self, random16, temp_output_dir):
        paths = write_snapshots(temp_output_dir, self._trajectory(random16, 5))
        assert [p.name for p in paths] == ["field_0.bin", "field_5.bin"]
        field, time = read_field(paths[-1])
        assert time == 1.0
        np.testing.assert_allclose(field.coefficients, 6.0 * random16.coefficients)

    def test_every_k_includes_last(self, random16, temp_output_dir):
        paths = write_snapshots(temp_output_dir, self._trajectory(random16, 12), every=5,
                                prefix="u")
        assert [p.name for p in paths] == ["u_00.bin", "u_05.bin", "u_10.bin", "u_12.bin"]
