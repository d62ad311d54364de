"""Multi-band raster container, the CARB1 file format and band arithmetic.

CARB1 layout (all integers and floats little-endian)::

    magic       6 bytes   b"CARB1\\0"
    width       u32
    height      u32
    cell_size   f64       metres per pixel
    origin_x    f64
    origin_y    f64
    band_count  u32
    per band:
        name_len    u16
        name        UTF-8 bytes
        values      height * width f64, row-major, top row first

NaN is the only nodata marker.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import FormatError, LookupFailure, ValidationError

MAGIC = b"CARB1\x00"
_HEADER = struct.Struct("<6sIIdddI")
HEADER_SIZE = _HEADER.size  # 42 bytes
_NAME_LEN = struct.Struct("<H")
_F64 = np.dtype("<f8")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid:
    """Single-band float grid, shape ``(height, width)``."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 2:
            raise ValidationError("grid values must be two-dimensional")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Raster:
    """Georeferenced multi-band raster.

    Parameters
    ----------
    bands : sequence of (name, array)
        Band grids in file order. Each array must be ``(height, width)``.
    cell_size : float
        Pixel size in metres, strictly positive.
    origin : (float, float)
        Projected coordinates of the top-left corner.

    Grids are copied and made read-only, so a Raster can be shared freely.
    Equality is bitwise on grids (NaN payloads included).
    """

    bands: tuple
    cell_size: float = 1.0
    origin: tuple = (0.0, 0.0)
    width: int = field(init=False)
    height: int = field(init=False)

    def __post_init__(self):
        bands = tuple((str(name), _frozen(grid)) for name, grid in self.bands)
        if not bands:
            raise ValidationError("raster must have at least one band")
        shape = bands[0][1].shape
        if len(shape) != 2 or shape[0] < 1 or shape[1] < 1:
            raise ValidationError(f"band {bands[0][0]!r} must be a non-empty 2-D grid")
        names = [name for name, _ in bands]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate band names in {names}")
        for name, grid in bands:
            if grid.shape != shape:
                raise ValidationError(
                    f"band {name!r} has shape {grid.shape}, expected {shape}"
                )
            if np.isinf(grid).any():
                raise ValidationError(f"band {name!r} contains infinite values")
            if len(name.encode("utf-8")) > 0xFFFF:
                raise ValidationError(f"band name {name[:20]!r}... is too long")
        cell_size = float(self.cell_size)
        if not np.isfinite(cell_size) or cell_size <= 0:
            raise ValidationError(f"cell_size must be positive, got {cell_size}")
        origin = tuple(float(v) for v in self.origin)
        if len(origin) != 2 or not all(np.isfinite(origin)):
            raise ValidationError(f"origin must be two finite numbers, got {self.origin}")
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "cell_size", cell_size)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "height", shape[0])
        object.__setattr__(self, "width", shape[1])

    @classmethod
    def from_arrays(cls, bands: Mapping[str, Sequence], cell_size=1.0, origin=(0.0, 0.0)):
        return cls(tuple(bands.items()), cell_size=cell_size, origin=origin)

    @property
    def band_names(self) -> list[str]:
        return [name for name, _ in self.bands]

    def band(self, name: str) -> np.ndarray:
        for band_name, grid in self.bands:
            if band_name == name:
                return grid
        raise LookupFailure(f"unknown band {name!r}; available: {self.band_names}")

    def row_slice(self, start: int, stop: int) -> "Raster":
        """Sub-raster of rows ``start:stop`` with the origin shifted to match."""
        if not 0 <= start < stop <= self.height:
            raise ValidationError(f"invalid row range {start}:{stop}")
        origin = (self.origin[0], self.origin[1] - start * self.cell_size)
        return Raster(
            tuple((name, grid[start:stop]) for name, grid in self.bands),
            cell_size=self.cell_size,
            origin=origin,
        )

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        if (self.width, self.height) != (other.width, other.height):
            return False
        if _struct_bits(self.cell_size, *self.origin) != _struct_bits(
            other.cell_size, *other.origin
        ):
            return False
        if self.band_names != other.band_names:
            return False
        return all(
            a.tobytes() == b.tobytes()
            for (_, a), (_, b) in zip(self.bands, other.bands)
        )

    __hash__ = None


def _struct_bits(*values: float) -> bytes:
    return struct.pack(f"<{len(values)}d", *values)


def encode_raster(raster: Raster) -> bytes:
    """Serialise ``raster`` to CARB1 bytes."""
    parts = [
        _HEADER.pack(
            MAGIC,
            raster.width,
            raster.height,
            raster.cell_size,
            raster.origin[0],
            raster.origin[1],
            len(raster.bands),
        )
    ]
    for name, grid in raster.bands:
        encoded = name.encode("utf-8")
        parts.append(_NAME_LEN.pack(len(encoded)))
        parts.append(encoded)
        parts.append(np.ascontiguousarray(grid, dtype=_F64).tobytes())
    return b"".join(parts)


def decode_raster(data: bytes) -> Raster:
    """Parse CARB1 bytes; errors carry the failing byte offset."""
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise FormatError("bad magic, not a CARB1 file", 0)
    if len(data) < HEADER_SIZE:
        raise FormatError("truncated header", len(data))
    _, width, height, cell_size, ox, oy, band_count = _HEADER.unpack_from(data, 0)
    if width == 0 or height == 0:
        raise FormatError(f"zero raster dimension {width}x{height}", 6)
    band_bytes = width * height * 8
    # Each band needs at least its name length plus payload.
    if band_count and band_bytes + 2 > len(data) - HEADER_SIZE:
        raise FormatError(
            f"dimensions {width}x{height} exceed file size {len(data)}", 6
        )
    if band_count == 0:
        raise ValidationError("CARB1 file declares zero bands")
    offset = HEADER_SIZE
    bands = []
    for index in range(band_count):
        if offset + 2 > len(data):
            raise FormatError(f"truncated name length of band {index}", offset)
        (name_len,) = _NAME_LEN.unpack_from(data, offset)
        offset += 2
        if offset + name_len > len(data):
            raise FormatError(f"truncated name of band {index}", offset)
        try:
            name = data[offset : offset + name_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"band {index} name is not UTF-8", offset + exc.start) from None
        offset += name_len
        if offset + band_bytes > len(data):
            raise FormatError(f"truncated payload of band {name!r}", len(data))
        grid = np.frombuffer(data, dtype=_F64, count=width * height, offset=offset)
        bands.append((name, grid.reshape(height, width)))
        offset += band_bytes
    if offset != len(data):
        raise FormatError("trailing bytes after last band", offset)
    return Raster(tuple(bands), cell_size=cell_size, origin=(ox, oy))


def save_raster(raster: Raster, path) -> None:
    """Write ``raster`` to ``path`` in CARB1 format.

    The raster is re-validated first so that a grid mutated behind the
    container's back cannot produce a malformed file.
    """
    raster = Raster(raster.bands, cell_size=raster.cell_size, origin=raster.origin)
    Path(path).write_bytes(encode_raster(raster))


def load_raster(path) -> Raster:
    return decode_raster(Path(path).read_bytes())


def normalized_difference(raster: Raster, band_a: str, band_b: str) -> Grid:
    """Per-pixel ``(a - b) / (a + b)``.

    Pixels where either input is NaN or ``a + b == 0`` become NaN. Results are
    clipped to ``[-1, 1]``, which only bites when an input is negative.
    """
    a = raster.band(band_a)
    b = raster.band(band_b)
    total = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        nd = (a - b) / total
    nd[total == 0] = np.nan
    np.clip(nd, -1.0, 1.0, out=nd)
    return Grid(nd)
