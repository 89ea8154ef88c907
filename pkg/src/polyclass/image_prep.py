"""Image decoding, grayscale conversion, Otsu thresholding and mask cleanup.

Produces the binary shape mask the contour tracer consumes. Supported inputs
are PNG (8/16-bit, via Pillow) and binary PGM (P5) / PPM (P6), parsed here.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy import ndimage

from .errors import DecodeError, DegenerateImageError, UnsupportedFormatError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass
class Image:
    """Decoded 8-bit image, shape (H, W, C) with C in {1, 3}."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] not in (1, 3):
            raise ValueError("Image pixels must have shape (H, W, C), C in {1, 3}")
        if self.pixels.dtype != np.uint8:
            raise ValueError("Image pixels must be uint8")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass
class GrayImage:
    """Single-channel 8-bit image, shape (H, W)."""

    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ValueError("GrayImage pixels must have shape (H, W)")
        if self.pixels.dtype != np.uint8:
            raise ValueError("GrayImage pixels must be uint8")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class BinaryImage:
    """Binary mask, shape (H, W), values in {0, 1}; 1 = foreground."""

    mask: np.ndarray

    def __post_init__(self):
        if self.mask.ndim != 2:
            raise ValueError("BinaryImage mask must have shape (H, W)")
        if self.mask.dtype != np.uint8:
            raise ValueError("BinaryImage mask must be uint8")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]


def _parse_pnm(data: bytes) -> Image:
    """Parse binary PGM (P5) / PPM (P6) with '#' comments in the header."""
    magic = data[:2]
    channels = 1 if magic == b"P5" else 3
    pos = 2
    fields: list[int] = []
    n = len(data)
    while len(fields) < 3:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DecodeError(f"PNM header truncated at byte {pos}")
        token = data[start:pos]
        try:
            fields.append(int(token))
        except ValueError:
            raise DecodeError(f"PNM header: non-numeric token {token!r} at byte {start}") from None
    if pos >= n:
        raise DecodeError("PNM header missing separator before pixel data")
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise DecodeError(f"PNM dimensions {width}x{height} invalid")
    if not 0 < maxval < 65536:
        raise DecodeError(f"PNM maxval {maxval} out of range")
    two_byte = maxval > 255
    expected = width * height * channels * (2 if two_byte else 1)
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise DecodeError(
            f"PNM payload truncated: expected {expected} bytes at offset {pos}, got {len(payload)}"
        )
    if two_byte:
        raw = np.frombuffer(payload, dtype=">u2").astype(np.uint32)
        pixels = ((raw * 255 + maxval // 2) // maxval).astype(np.uint8)
    else:
        pixels = np.frombuffer(payload, dtype=np.uint8)
    return Image(pixels.reshape(height, width, channels).copy())


def _decode_png(data: bytes) -> Image:
    try:
        img = PILImage.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"PNG decode failed: {exc}") from exc
    if img.mode in ("I", "I;16", "I;16B", "I;16L"):
        arr = np.asarray(img, dtype=np.uint32)
        top = max(int(arr.max()), 255)
        scale = 65535 if top > 255 else 255
        arr = ((arr * 255 + scale // 2) // scale).astype(np.uint8)
        return Image(arr[:, :, None].copy())
    if img.mode in ("L", "1"):
        arr = np.asarray(img.convert("L"), dtype=np.uint8)
        return Image(arr[:, :, None].copy())
    arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return Image(arr.copy())


def decode_image(data: bytes) -> Image:
    """Decode PNG or binary PGM/PPM bytes to an 8-bit Image."""
    if data[:8] == _PNG_MAGIC:
        return _decode_png(data)
    if data[:2] in (b"P5", b"P6"):
        return _parse_pnm(data)
    if data[:2] in (b"P1", b"P2", b"P3", b"P4"):
        raise UnsupportedFormatError(
            f"ASCII/bitmap PNM variant {data[:2]!r} not supported; use binary P5/P6"
        )
    raise UnsupportedFormatError(f"unrecognized image format (leading bytes {data[:8]!r})")


def to_grayscale(img: Image) -> GrayImage:
    """BT.601 luma (0.299/0.587/0.114), rounded half away from zero."""
    if img.channels == 1:
        return GrayImage(img.pixels[:, :, 0].copy())
    rgb = img.pixels.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return GrayImage(np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8))


def otsu_threshold(img: GrayImage, polarity: str = "auto") -> BinaryImage:
    """Threshold at the exact maximizer of between-class variance.

    The comparison is done in integer arithmetic (counts and intensity sums),
    so the argmax and its tie-break (smallest t) are exact, not float-rounded.
    polarity: 'auto' picks the smaller-population side as foreground
    (tie goes to the dark side), 'foreground-dark'/'foreground-light' force it.
    """
    if polarity not in ("auto", "foreground-dark", "foreground-light"):
        raise ValueError(f"unknown polarity {polarity!r}")
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    if int(np.count_nonzero(hist)) < 2:
        raise DegenerateImageError("image is constant; no threshold separates anything")
    counts = [int(c) for c in hist]
    total = sum(counts)
    total_sum = sum(i * c for i, c in enumerate(counts))

    best_t = 0
    best_num = -1  # (s0*w1 - s1*w0)^2, compared as fractions over w0*w1
    best_den = 1
    w0 = 0
    s0 = 0
    for t in range(256):
        w0 += counts[t]
        s0 += t * counts[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        s1 = total_sum - s0
        num = (s0 * w1 - s1 * w0) ** 2
        den = w0 * w1
        # num/den > best_num/best_den, exact in integers
        if num * best_den > best_num * den:
            best_num = num
            best_den = den
            best_t = t

    dark = img.pixels <= best_t
    n_dark = int(dark.sum())
    if polarity == "foreground-dark":
        fg = dark
    elif polarity == "foreground-light":
        fg = ~dark
    else:
        fg = dark if n_dark <= total - n_dark else ~dark
    return BinaryImage(fg.astype(np.uint8))


def exhaustive_otsu(img: GrayImage) -> int:
    """Independent brute-force sweep of all 256 thresholds (test oracle)."""
    pixels = img.pixels.ravel()
    best_t = 0
    best_num = -1
    best_den = 1
    for t in range(256):
        lo = pixels[pixels <= t]
        hi = pixels[pixels > t]
        if lo.size == 0 or hi.size == 0:
            continue
        w0, w1 = lo.size, hi.size
        s0, s1 = int(lo.sum()), int(hi.sum())
        num = (s0 * w1 - s1 * w0) ** 2
        den = w0 * w1
        if num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    return best_t


def default_denoise_radius(width: int, height: int) -> int:
    """Speck-removal radius scaled with resolution."""
    m = max(width, height)
    if m <= 64:
        return 1
    return max(1, round(m / 512))


def denoise(mask: BinaryImage, radius: int) -> BinaryImage:
    """Morphological opening then closing with a (2r+1)-square element.

    The closing's erosion treats out-of-image pixels as foreground so that
    objects touching the border are not eaten (the usual border artifact).
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return BinaryImage(mask.mask.copy())
    side = 2 * radius + 1
    structure = np.ones((side, side), dtype=bool)
    m = mask.mask.astype(bool)
    opened = ndimage.binary_dilation(
        ndimage.binary_erosion(m, structure=structure, border_value=0),
        structure=structure,
        border_value=0,
    )
    closed = ndimage.binary_erosion(
        ndimage.binary_dilation(opened, structure=structure, border_value=0),
        structure=structure,
        border_value=1,
    )
    return BinaryImage(closed.astype(np.uint8))
