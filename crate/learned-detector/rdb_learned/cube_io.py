"""Reader and writer for RCB1 containers (radar cubes, occupancy grids,
point clouds), matching the byte layout in FORMATS.md.

Only the kinds the learned detector consumes or emits are supported.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

MAGIC = b"RCB1"
VERSION = 1
NO_DTYPE = 0xFF

KIND_RADAR_CUBE = 1
KIND_GRID = 2
KIND_POINT_CLOUD = 3

F32, U16, BITS = 0, 2, 3

_DTYPES = {
    KIND_RADAR_CUBE: (F32, U16),
    KIND_GRID: (BITS, NO_DTYPE),
    KIND_POINT_CLOUD: (F32, NO_DTYPE),
}
_N_AXES = {KIND_RADAR_CUBE: 4, KIND_GRID: 3, KIND_POINT_CLOUD: 0}


class DecodeError(ValueError):
    pass


@dataclass
class RadarCube:
    power_db: np.ndarray  # float32 (R, A, D)
    elevation: np.ndarray  # uint16 (R, A, D), bin index into sin_el_edges
    range_edges: np.ndarray
    sin_az_edges: np.ndarray
    velocity: np.ndarray
    sin_el_edges: np.ndarray

    @property
    def n_elevation(self) -> int:
        return len(self.sin_el_edges) - 1


@dataclass
class OccupancyGrid:
    occupied: np.ndarray  # bool (R, A, E)
    range_edges: np.ndarray
    sin_az_edges: np.ndarray
    sin_el_edges: np.ndarray


def _header(kind: int, dims, axes, meta: bytes = b"") -> bytearray:
    primary, secondary = _DTYPES[kind]
    out = bytearray(MAGIC)
    out += struct.pack("<4B", VERSION, kind, primary, secondary)
    out += struct.pack("<3I", *dims)
    out += struct.pack("<I", len(axes))
    for axis in axes:
        axis = np.asarray(axis, dtype="<f8")
        out += struct.pack("<I", len(axis)) + axis.tobytes()
    out += struct.pack("<I", len(meta)) + meta
    return out


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int, field: str) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError(f"header shorter than its fields ({field})")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, field: str) -> int:
        return struct.unpack("<I", self.take(4, field))[0]

    def payload(self, n: int) -> bytes:
        available = len(self.data) - self.pos
        if available < n:
            raise DecodeError(
                f"payload shorter than header claims ({n} bytes expected, {available} available)"
            )
        if available > n:
            raise DecodeError(f"{available - n} trailing bytes after the payload")
        return self.data[self.pos :]


def _read_header(data: bytes, expected_kind: int):
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise DecodeError(f"magic: expected 'RCB1', found {magic!r}")
    version, kind, primary, secondary = struct.unpack("<4B", r.take(4, "version"))
    if version != VERSION:
        raise DecodeError(f"version: unsupported version {version}")
    if kind != expected_kind:
        raise DecodeError(f"payload_kind: expected {expected_kind}, file holds {kind}")
    if (primary, secondary) != _DTYPES[kind]:
        raise DecodeError(f"dtype: header says {(primary, secondary)}")
    dims = struct.unpack("<3I", r.take(12, "dims"))
    n_axes = r.u32("axis count")
    if n_axes != _N_AXES[kind]:
        raise DecodeError(f"axes: expected {_N_AXES[kind]} blocks, header says {n_axes}")
    axes = []
    for _ in range(n_axes):
        n = r.u32("axis length")
        axes.append(np.frombuffer(r.take(8 * n, "axis values"), dtype="<f8").copy())
    meta_len = r.u32("metadata length")
    r.take(meta_len, "metadata")
    return r, dims, axes


def _check_axis(axis, length: int, name: str):
    if len(axis) != length:
        raise DecodeError(f"axes: {name} axis has {len(axis)} values, expected {length}")


def decode_radar_cube(data: bytes) -> RadarCube:
    r, (nr, na, nd), axes = _read_header(data, KIND_RADAR_CUBE)
    _check_axis(axes[0], nr + 1, "range")
    _check_axis(axes[1], na + 1, "azimuth")
    _check_axis(axes[2], nd, "velocity")
    n = nr * na * nd
    payload = r.payload(6 * n)
    power = np.frombuffer(payload, dtype="<f4", count=n).reshape(nr, na, nd)
    elevation = np.frombuffer(payload, dtype="<u2", count=n, offset=4 * n).reshape(nr, na, nd)
    cube = RadarCube(power.astype(np.float32), elevation.astype(np.uint16), *axes)
    if elevation.size and int(elevation.max()) >= cube.n_elevation:
        raise DecodeError("payload: elevation index outside the elevation axis")
    return cube


def decode_grid(data: bytes) -> OccupancyGrid:
    r, (nr, na, ne), axes = _read_header(data, KIND_GRID)
    for axis, n, name in zip(axes, (nr, na, ne), ("range", "azimuth", "elevation")):
        _check_axis(axis, n + 1, name)
    row_bytes = (ne + 7) // 8
    rows = np.frombuffer(r.payload(nr * na * row_bytes), dtype=np.uint8).reshape(nr, na, row_bytes)
    bits = np.unpackbits(rows, axis=2, bitorder="little")
    if bits[:, :, ne:].any():
        raise DecodeError("payload: padding bit set")
    return OccupancyGrid(bits[:, :, :ne].astype(bool), *axes)


def encode_grid(grid: OccupancyGrid) -> bytes:
    nr, na, ne = grid.occupied.shape
    for axis, n in zip((grid.range_edges, grid.sin_az_edges, grid.sin_el_edges), (nr, na, ne)):
        _check_axis(axis, n + 1, "grid")
    out = _header(KIND_GRID, (nr, na, ne), (grid.range_edges, grid.sin_az_edges, grid.sin_el_edges))
    out += np.packbits(grid.occupied.astype(np.uint8), axis=2, bitorder="little").tobytes()
    return bytes(out)


def decode_point_cloud(data: bytes) -> np.ndarray:
    r, (n, three, one), _ = _read_header(data, KIND_POINT_CLOUD)
    if (three, one) != (3, 1):
        raise DecodeError(f"dims: point cloud dims must be (n, 3, 1), got {(n, three, one)}")
    return np.frombuffer(r.payload(12 * n), dtype="<f4").reshape(n, 3).astype(np.float64)


def grid_from_probabilities(probabilities: np.ndarray, cube: RadarCube, threshold: float = 0.5) -> OccupancyGrid:
    """Binarizes an (R, A, E) probability volume on the cube's own axes."""
    expected = (len(cube.range_edges) - 1, len(cube.sin_az_edges) - 1, cube.n_elevation)
    if probabilities.shape != expected:
        raise ValueError(f"probabilities {probabilities.shape} do not match cube grid {expected}")
    if not np.all(np.isfinite(probabilities)) or probabilities.min() < 0 or probabilities.max() > 1:
        raise ValueError("probabilities must be finite and in [0, 1]")
    return OccupancyGrid(probabilities >= threshold, cube.range_edges, cube.sin_az_edges, cube.sin_el_edges)


def read_radar_cube(path) -> RadarCube:
    with open(path, "rb") as f:
        return decode_radar_cube(f.read())


def read_grid(path) -> OccupancyGrid:
    with open(path, "rb") as f:
        return decode_grid(f.read())


def write_grid(path, grid: OccupancyGrid) -> None:
    """Writes through a temporary file so a failure leaves nothing behind."""
    data = encode_grid(grid)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
