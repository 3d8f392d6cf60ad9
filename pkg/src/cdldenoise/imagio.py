"""Raster image IO: binary PGM/PPM codecs, intensity conversion, noise injection.

All pixel data lives on a normalized scale where the 8-bit value 255 maps
to 1.0.  Values may leave [0, 1] after noise injection; clamping happens
only when encoding back to 8 bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import BadMagic, TruncatedData, UnsupportedFormat

_MAXVAL = 255
_WHITESPACE = b" \t\n\r\x0b\x0c"
_RAW_MAGIC = b"CDR1"

# BT.601 luma weights for RGB guidance intensity extraction.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class GrayImage:
    """Immutable single-channel raster, row-major float64 pixels."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64, order="C")
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("pixels must be a 2-D array with positive dimensions")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """Immutable three-channel raster, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64, order="C")
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("pixels must have shape (height, width, 3)")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian noise level (8-bit units) plus reproducibility seed."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def _next_token(data: bytes, start: int) -> tuple[bytes, int]:
    """Return the next whitespace-separated header token, skipping '#' comments."""
    i, n = start, len(data)
    while i < n:
        c = data[i]
        if c in _WHITESPACE:
            i += 1
        elif c == 0x23:  # '#'
            while i < n and data[i] not in b"\r\n":
                i += 1
        else:
            break
    if i >= n:
        raise TruncatedData("header ended before all fields were read")
    j = i
    while j < n and data[j] not in _WHITESPACE and data[j] != 0x23:
        j += 1
    return data[i:j], j


def _parse_dim(token: bytes, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise UnsupportedFormat(f"malformed {what} field {token!r}") from None
    if value < 1:
        raise UnsupportedFormat(f"{what} must be positive, got {value}")
    return value


def decode_image(data: bytes) -> GrayImage | RgbImage:
    """Decode binary PGM (P5) or PPM (P6), 8-bit, maxval 255.

    Header tokens are whitespace separated; comment lines starting with
    '#' are permitted.  Pixel value p maps to p/255 exactly.
    """
    data = bytes(data)
    magic, pos = _next_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormat(f"unsupported magic {magic!r}")
    width_tok, pos = _next_token(data, pos)
    height_tok, pos = _next_token(data, pos)
    maxval_tok, pos = _next_token(data, pos)
    width = _parse_dim(width_tok, "width")
    height = _parse_dim(height_tok, "height")
    maxval = _parse_dim(maxval_tok, "maxval")
    if maxval != _MAXVAL:
        raise UnsupportedFormat(f"only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise UnsupportedFormat("missing whitespace after maxval")
    payload = data[pos + 1 :]
    channels = 1 if magic == b"P5" else 3
    needed = width * height * channels
    if len(payload) < needed:
        raise TruncatedData(f"payload holds {len(payload)} bytes, expected {needed}")
    raw = np.frombuffer(payload[:needed], dtype=np.uint8).astype(np.float64) / _MAXVAL
    if channels == 1:
        return GrayImage(raw.reshape(height, width))
    return RgbImage(raw.reshape(height, width, 3))


def encode_image(img: GrayImage) -> bytes:
    """Encode as binary PGM (P5), clamping to [0, 1] and rounding half away from zero."""
    clamped = np.clip(img.pixels, 0.0, 1.0)
    # values are non-negative after clamping, so floor(x + .5) rounds half away from zero
    quantized = np.floor(clamped * _MAXVAL + 0.5).astype(np.uint8)
    header = f"P5\n{img.width} {img.height}\n{_MAXVAL}\n".encode("ascii")
    return header + quantized.tobytes()


def rgb_to_intensity(rgb: RgbImage) -> GrayImage:
    """Collapse an RGB raster to intensity with BT.601 luma weights."""
    return GrayImage(rgb.pixels @ _LUMA_WEIGHTS)


def add_gaussian_noise(img: GrayImage, spec: NoiseSpec) -> GrayImage:
    """Add i.i.d. zero-mean Gaussian noise with std sigma/255, unclamped.

    The noise field is a deterministic function of spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal(img.pixels.shape) * (spec.sigma / _MAXVAL)
    return GrayImage(img.pixels + noise)


def encode_raw(img: GrayImage) -> bytes:
    """Encode the unclamped float raster: magic CDR1, u32le w/h, w*h f64le values."""
    header = _RAW_MAGIC + struct.pack("<II", img.width, img.height)
    return header + img.pixels.astype("<f8").tobytes()


def decode_raw(data: bytes) -> GrayImage:
    """Decode a CDR1 float raster written by encode_raw."""
    data = bytes(data)
    if data[:4] != _RAW_MAGIC:
        raise BadMagic(f"expected {_RAW_MAGIC!r}, got {data[:4]!r}")
    if len(data) < 12:
        raise TruncatedData("raw raster header is incomplete")
    width, height = struct.unpack_from("<II", data, 4)
    if width < 1 or height < 1:
        raise UnsupportedFormat("raw raster dimensions must be positive")
    needed = 12 + width * height * 8
    if len(data) < needed:
        raise TruncatedData(f"raw raster holds {len(data)} bytes, expected {needed}")
    values = np.frombuffer(data[12:needed], dtype="<f8")
    return GrayImage(values.reshape(height, width))


def decode_any(data: bytes) -> GrayImage | RgbImage:
    """Decode by sniffing the magic: CDR1 raw raster, else PGM/PPM."""
    if bytes(data[:4]) == _RAW_MAGIC:
        return decode_raw(data)
    return decode_image(data)
