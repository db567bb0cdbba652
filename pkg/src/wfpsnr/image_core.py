"""Grayscale images, block grids, and binary PGM (P5) file I/O.

Images are real-valued rasters in [0, 1]. 8-bit and 16-bit PGM files are
normalized on load; saving always quantizes back to 8 bits. All containers
freeze their arrays after construction, so instances are safe to share
between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class PgmError(ValueError):
    """Base class for PGM parsing failures."""


class UnsupportedFormatError(PgmError):
    """Magic number is not binary P5, or maxval is neither 255 nor 65535."""


class MalformedHeaderError(PgmError):
    """Header tokens are missing, non-numeric, or non-positive."""


class TruncatedPayloadError(PgmError):
    """Pixel payload ends before width * height samples."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale raster with float64 samples in [0, 1], shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 2 or p.size == 0:
            raise ValueError("image must be a non-empty 2-D array")
        if not np.all(np.isfinite(p)):
            raise ValueError("image samples must be finite")
        if float(p.min()) < 0.0 or float(p.max()) > 1.0:
            raise ValueError("image samples must lie in [0, 1]")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class BlockGrid:
    """Per-block scalar field: one value for each block of a tiled image.

    Blocks are counted in row-major order; border blocks may cover fewer
    pixels than block_size x block_size when the image dimensions are not
    multiples of block_size.
    """

    block_size: int
    values: np.ndarray

    def __post_init__(self):
        if self.block_size <= 0:
            raise ValueError("block_size must be positive")
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("grid values must be a non-empty 2-D array")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Boolean per-pixel mask selecting a region of an image."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2 or b.size == 0:
            raise ValueError("mask must be a non-empty 2-D array")
        object.__setattr__(self, "bits", _freeze(b))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


_WHITESPACE = b" \t\n\r\x0b\x0c"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Return the next header token, skipping whitespace and # comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in (b"#",):
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeaderError("unexpected end of PGM header")
    return data[start:pos], pos


def load_pgm(path) -> GrayImage:
    """Load a binary PGM (P5) file with maxval 255 or 65535.

    Samples are divided by maxval, so the result lies in [0, 1].
    """
    data = Path(path).read_bytes()
    if len(data) < 2 or data[:2] != b"P5":
        raise UnsupportedFormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            value = int(token)
        except ValueError:
            raise MalformedHeaderError(f"{path}: non-numeric header token {token!r}") from None
        fields.append(value)
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"{path}: non-positive dimensions {width}x{height}")
    if maxval not in (255, 65535):
        raise UnsupportedFormatError(f"{path}: unsupported maxval {maxval}")
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise MalformedHeaderError(f"{path}: missing whitespace after maxval")
    pos += 1
    count = width * height
    if maxval == 255:
        payload = data[pos : pos + count]
        if len(payload) < count:
            raise TruncatedPayloadError(f"{path}: expected {count} samples, got {len(payload)}")
        samples = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        payload = data[pos : pos + 2 * count]
        if len(payload) < 2 * count:
            raise TruncatedPayloadError(
                f"{path}: expected {2 * count} payload bytes, got {len(payload)}"
            )
        samples = np.frombuffer(payload, dtype=">u2").astype(np.float64)
    return GrayImage(samples.reshape(height, width) / maxval)


def save_pgm(img: GrayImage, path) -> None:
    """Write img as a binary PGM (P5) with maxval 255, rounding half up."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    payload = np.floor(img.pixels * 255.0 + 0.5).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def block_mean(field: np.ndarray, block_size: int) -> np.ndarray:
    """Mean of each block_size x block_size tile of a 2-D field.

    Border tiles cover the remainder pixels, so no pixel is dropped.
    """
    if block_size <= 0:
        raise ValueError("block_size must be positive")
    h, w = field.shape
    rows = math.ceil(h / block_size)
    cols = math.ceil(w / block_size)
    out = np.empty((rows, cols), dtype=np.float64)
    for r in range(rows):
        for c in range(cols):
            tile = field[
                r * block_size : min((r + 1) * block_size, h),
                c * block_size : min((c + 1) * block_size, w),
            ]
            out[r, c] = tile.mean()
    return out


def block_reduce(img: GrayImage, block_size: int, reducer: str = "mean") -> BlockGrid:
    """Reduce an image to a per-block grid; only the mean reducer is defined."""
    if reducer != "mean":
        raise ValueError(f"unsupported reducer {reducer!r}")
    return BlockGrid(block_size, block_mean(img.pixels, block_size))


def upsample_nearest(grid: BlockGrid, width: int, height: int) -> np.ndarray:
    """Expand a block grid to per-pixel resolution by nearest-block lookup.

    Pixel (r, c) takes the value of block (r // block_size, c // block_size);
    the grid must cover the target dimensions.
    """
    bs = grid.block_size
    if math.ceil(height / bs) != grid.rows or math.ceil(width / bs) != grid.cols:
        raise ValueError(
            f"grid {grid.rows}x{grid.cols} (block {bs}) does not cover {width}x{height} pixels"
        )
    tiled = np.repeat(np.repeat(grid.values, bs, axis=0), bs, axis=1)
    return tiled[:height, :width]


def resize_bilinear(field: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Resample a 2-D field with bilinear interpolation (half-pixel centers)."""
    if out_height <= 0 or out_width <= 0:
        raise ValueError("output dimensions must be positive")
    h, w = field.shape
    src_r = np.clip((np.arange(out_height) + 0.5) * h / out_height - 0.5, 0.0, h - 1.0)
    src_c = np.clip((np.arange(out_width) + 0.5) * w / out_width - 0.5, 0.0, w - 1.0)
    r0 = np.floor(src_r).astype(int)
    c0 = np.floor(src_c).astype(int)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (src_r - r0)[:, None]
    fc = (src_c - c0)[None, :]
    top = field[np.ix_(r0, c0)] * (1 - fc) + field[np.ix_(r0, c1)] * fc
    bottom = field[np.ix_(r1, c0)] * (1 - fc) + field[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bottom * fr
