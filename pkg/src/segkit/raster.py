"""Image containers, binary PNM codec, box smoothing, and Sobel gradients.

Pixels are 8-bit. All window operations handle borders by clamping
coordinates to the image (edge replication), so outputs keep the input
dimensions. Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, TruncatedData, UnsupportedMaxval

UNLABELED = -1


@dataclass(frozen=True)
class GrayImage:
    """Single-channel image; pixels is a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("GrayImage needs a (height, width) array with both dims >= 1")
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class RgbImage:
    """Three-channel image; pixels is a (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("RgbImage needs a (height, width, 3) array with both dims >= 1")
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel integer labels.

    labels is a (height, width) int32 array. When complete, every entry is
    in [0, k); otherwise entries may be UNLABELED (-1).
    """

    labels: np.ndarray
    k: int
    complete: bool = True

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int32)
        if lab.ndim != 2:
            raise ValueError("labels must be a (height, width) array")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.complete:
            if lab.min() < 0 or lab.max() >= self.k:
                raise ValueError("complete LabelMap must have all labels in [0, k)")
        else:
            if lab.min() < UNLABELED or lab.max() >= self.k:
                raise ValueError("partial LabelMap labels must be UNLABELED or in [0, k)")
        object.__setattr__(self, "labels", lab)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class GradientMap:
    """Nonnegative gradient magnitude per pixel, (height, width) int32."""

    magnitude: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.magnitude)
        if m.ndim != 2:
            raise ValueError("magnitude must be a (height, width) array")
        if m.min() < 0:
            raise ValueError("magnitudes must be nonnegative")
        object.__setattr__(self, "magnitude", m)

    @property
    def width(self) -> int:
        return self.magnitude.shape[1]

    @property
    def height(self) -> int:
        return self.magnitude.shape[0]


def _read_header_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments (comment runs to end of line)
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    if pos >= n:
        raise TruncatedData("header ended before all fields were read")
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def decode_pnm(data: bytes) -> GrayImage | RgbImage:
    """Decode binary PGM (P5) or PPM (P6) bytes, maxval 255 only.

    Header fields may be separated by arbitrary whitespace and '#' comments;
    exactly one whitespace byte separates the maxval from the raw samples.

    Raises BadMagic, UnsupportedMaxval, or TruncatedData.
    """
    if len(data) < 2:
        raise TruncatedData("fewer than 2 bytes")
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise BadMagic(f"unsupported magic {magic!r}")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_header_token(data, pos)
        if not tok.isdigit():
            raise TruncatedData(f"malformed header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} (only 255 supported)")
    if width < 1 or height < 1:
        raise TruncatedData(f"bad dimensions {width}x{height}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise TruncatedData("missing whitespace byte after maxval")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    raw = data[pos : pos + need]
    if len(raw) < need:
        raise TruncatedData(f"need {need} sample bytes, got {len(raw)}")
    arr = np.frombuffer(raw, dtype=np.uint8)
    if channels == 1:
        return GrayImage(arr.reshape(height, width).copy())
    return RgbImage(arr.reshape(height, width, 3).copy())


def encode_pnm(image: GrayImage | RgbImage) -> bytes:
    """Encode to canonical binary PNM: magic, dims, maxval 255, raw samples."""
    if isinstance(image, GrayImage):
        magic = b"P5"
    elif isinstance(image, RgbImage):
        magic = b"P6"
    else:
        raise TypeError(f"expected GrayImage or RgbImage, got {type(image).__name__}")
    header = magic + b"\n" + f"{image.width} {image.height}".encode() + b"\n255\n"
    return header + image.pixels.tobytes()


def to_gray(image: RgbImage) -> GrayImage:
    """Convert color to gray via 0.299 R + 0.587 G + 0.114 B, rounded half up."""
    p = image.pixels.astype(np.float64)
    luma = 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]
    out = np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(out)


def _clamped_window_sums(values: np.ndarray, radius: int) -> np.ndarray:
    """Sum of the (2r+1)^2 window around each pixel, coordinates clamped.

    values must be integral; the result is an exact int64 array.
    """
    padded = np.pad(values.astype(np.int64), radius, mode="edge")
    # integral image with a zero top row/left column
    ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    ii[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    w = 2 * radius + 1
    h, wid = values.shape
    return (
        ii[w : w + h, w : w + wid]
        - ii[0:h, w : w + wid]
        - ii[w : w + h, 0:wid]
        + ii[0:h, 0:wid]
    )


def box_smooth(image: GrayImage, radius: int) -> GrayImage:
    """Mean filter over the (2r+1)^2 clamped window, rounded half up."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return GrayImage(image.pixels.copy())
    area = (2 * radius + 1) ** 2
    sums = _clamped_window_sums(image.pixels, radius)
    out = (2 * sums + area) // (2 * area)
    return GrayImage(out.astype(np.uint8))


def sobel_magnitude(image: GrayImage) -> GradientMap:
    """Gradient magnitude |Gx| + |Gy| with the standard 3x3 Sobel kernels.

    Integer arithmetic throughout; borders use edge replication.
    """
    p = np.pad(image.pixels.astype(np.int64), 1, mode="edge")
    gx = (
        (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    mag = (np.abs(gx) + np.abs(gy)).astype(np.int32)
    return GradientMap(mag)
