"""PNM image and PBM mask codecs plus the benchmark CSV writer.

PNM keeps the package codec-free: P2/P5 grayscale and P3/P6 color images with
maxval 255, and P1/P4 bilevel masks where bit 1 marks a known pixel. Decoders
validate strictly - truncated rasters, out-of-range samples, and unsupported
maxvals are rejected with the byte offset of the problem; encoders are
deterministic byte for byte.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

_WS = b" \t\r\n\x0b\x0c"


class PnmParseError(ValueError):
    """Malformed PNM/PBM input; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ImageFile:
    """Decoded 8-bit image: (h, w) grayscale or (h, w, 3) color, uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.dtype != np.uint8 or p.ndim not in (2, 3) or (p.ndim == 3 and p.shape[2] != 3):
            raise ValueError("pixels must be uint8 with shape (h, w) or (h, w, 3)")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def channel_fields(self) -> np.ndarray:
        """Float64 channel stack (channels, h, w) for the solvers."""
        if self.pixels.ndim == 2:
            return self.pixels[None, :, :].astype(np.float64)
        return np.moveaxis(self.pixels, 2, 0).astype(np.float64)


def image_from_fields(fields: np.ndarray) -> ImageFile:
    """Round and clip solver output (channels, h, w) back to 8-bit."""
    q = np.clip(np.round(fields), 0, 255).astype(np.uint8)
    if q.shape[0] == 1:
        return ImageFile(q[0])
    if q.shape[0] != 3:
        raise ValueError(f"expected 1 or 3 channels, got {q.shape[0]}")
    return ImageFile(np.moveaxis(q, 0, 2))


class _Scanner:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.last_start = 0  # offset of the most recent token, for error reports

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def skip_space(self) -> None:
        """Advance past whitespace and # comments."""
        d = self.data
        while self.pos < len(d):
            c = d[self.pos : self.pos + 1]
            if c in (b"#",):
                nl = d.find(b"\n", self.pos)
                self.pos = len(d) if nl < 0 else nl + 1
            elif c in _WS:
                self.pos += 1
            else:
                return

    def token(self, what: str) -> bytes:
        self.skip_space()
        if self.eof():
            raise PnmParseError(f"unexpected end of file reading {what}", self.pos)
        self.last_start = self.pos
        d = self.data
        while self.pos < len(d) and d[self.pos : self.pos + 1] not in _WS + b"#":
            self.pos += 1
        return d[self.last_start : self.pos]

    def int_token(self, what: str, lo: int, hi: int) -> int:
        tok = self.token(what)
        try:
            val = int(tok)
        except ValueError:
            raise PnmParseError(f"invalid {what} {tok!r}", self.last_start) from None
        if not lo <= val <= hi:
            raise PnmParseError(f"{what} {val} out of range [{lo}, {hi}]", self.last_start)
        return val

    def require_raster_separator(self) -> None:
        if self.eof() or self.data[self.pos : self.pos + 1] not in _WS:
            raise PnmParseError("expected whitespace before binary raster", self.pos)
        self.pos += 1

    def require_trailing_space_only(self) -> None:
        self.skip_space()
        if not self.eof():
            raise PnmParseError("trailing data after raster", self.pos)


def _ascii_samples(sc: _Scanner, count: int, maxval: int) -> np.ndarray:
    out = np.empty(count, dtype=np.uint8)
    for i in range(count):
        out[i] = sc.int_token("sample", 0, maxval)
    sc.require_trailing_space_only()
    return out


def _binary_samples(sc: _Scanner, count: int) -> np.ndarray:
    sc.require_raster_separator()
    raw = sc.data[sc.pos : sc.pos + count]
    if len(raw) < count:
        raise PnmParseError(
            f"truncated raster: expected {count} bytes, found {len(raw)}", len(sc.data)
        )
    sc.pos += count
    tail = sc.data[sc.pos :]
    if tail.strip(_WS):
        raise PnmParseError("trailing data after raster", sc.pos)
    return np.frombuffer(raw, dtype=np.uint8).copy()


def read_pnm(path) -> ImageFile:
    """Read a P2/P5 grayscale or P3/P6 color image with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    sc = _Scanner(data)
    magic = sc.token("magic number")
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise PnmParseError(f"unsupported magic {magic!r} for an image", 0)
    width = sc.int_token("width", 1, 1 << 20)
    height = sc.int_token("height", 1, 1 << 20)
    maxval = sc.int_token("maxval", 1, 65535)
    if maxval != 255:
        raise PnmParseError(f"unsupported maxval {maxval}, only 255", sc.last_start)
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if magic in (b"P2", b"P3"):
        flat = _ascii_samples(sc, count, maxval)
    else:
        flat = _binary_samples(sc, count)
    if channels == 1:
        return ImageFile(flat.reshape(height, width))
    return ImageFile(flat.reshape(height, width, 3))


def write_pnm(path, image: ImageFile, ascii_format: bool = False) -> None:
    """Write P5/P6 (or P2/P3 when ascii_format) with maxval 255."""
    p = image.pixels
    if ascii_format:
        magic = "P2" if image.channels == 1 else "P3"
        body = "\n".join(" ".join(str(v) for v in row) for row in p.reshape(image.height, -1))
        payload = f"{magic}\n{image.width} {image.height}\n255\n{body}\n".encode("ascii")
    else:
        magic = "P5" if image.channels == 1 else "P6"
        payload = f"{magic}\n{image.width} {image.height}\n255\n".encode("ascii") + p.tobytes()
    with open(path, "wb") as fh:
        fh.write(payload)


def read_mask(path) -> np.ndarray:
    """Read a P1/P4 bilevel mask; bit 1 means known pixel."""
    with open(path, "rb") as fh:
        data = fh.read()
    sc = _Scanner(data)
    magic = sc.token("magic number")
    if magic not in (b"P1", b"P4"):
        raise PnmParseError(f"unsupported magic {magic!r} for a mask", 0)
    width = sc.int_token("width", 1, 1 << 20)
    height = sc.int_token("height", 1, 1 << 20)
    if magic == b"P1":
        bits = np.empty(width * height, dtype=bool)
        for i in range(bits.size):
            sc.skip_space()
            if sc.eof():
                raise PnmParseError("truncated P1 raster", sc.pos)
            c = sc.data[sc.pos : sc.pos + 1]
            if c not in (b"0", b"1"):
                raise PnmParseError(f"invalid P1 raster character {c!r}", sc.pos)
            bits[i] = c == b"1"
            sc.pos += 1
        sc.require_trailing_space_only()
        return bits.reshape(height, width)
    sc.require_raster_separator()
    row_bytes = (width + 7) // 8
    count = row_bytes * height
    raw = sc.data[sc.pos : sc.pos + count]
    if len(raw) < count:
        raise PnmParseError(
            f"truncated raster: expected {count} bytes, found {len(raw)}", len(sc.data)
        )
    sc.pos += count
    if sc.data[sc.pos :].strip(_WS):
        raise PnmParseError("trailing data after raster", sc.pos)
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(height, row_bytes)
    return np.unpackbits(rows, axis=1)[:, :width].astype(bool)


def write_mask(path, mask: np.ndarray, ascii_format: bool = False) -> None:
    """Write a P4 (or P1) bilevel mask; bit 1 means known pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if ascii_format:
        body = "\n".join(" ".join("1" if v else "0" for v in row) for row in mask)
        payload = f"P1\n{w} {h}\n{body}\n".encode("ascii")
    else:
        packed = np.packbits(mask.astype(np.uint8), axis=1)
        payload = f"P4\n{w} {h}\n".encode("ascii") + packed.tobytes()
    with open(path, "wb") as fh:
        fh.write(payload)


CSV_FIELDS = (
    "solver",
    "width",
    "height",
    "density",
    "seed",
    "alpha",
    "tol",
    "iterations",
    "rel_residual",
    "mse_vs_reference",
    "psnr",
    "wall_time_s",
)
CSV_HEADER = ",".join(CSV_FIELDS)

_FORMATS = {
    "density": "{:g}",
    "alpha": "{:g}",
    "tol": "{:g}",
    "rel_residual": "{:.6e}",
    "mse_vs_reference": "{:.8e}",
    "psnr": "{:.4f}",
    "wall_time_s": "{:.6f}",
}


def write_report_csv(path, rows) -> None:
    """Write benchmark rows in the given order under the fixed header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for row in rows:
            out = []
            for key in CSV_FIELDS:
                val = row.get(key)
                if val is None:
                    out.append("")
                elif key in _FORMATS and isinstance(val, float):
                    out.append(_FORMATS[key].format(val))
                else:
                    out.append(str(val))
            writer.writerow(out)
