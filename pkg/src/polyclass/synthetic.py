"""Synthetic shape datasets: 28x28 IDX-style silhouettes and high-resolution
leaf-like blobs.

The 10 silhouette classes are geometrically distinct (disk, square, triangle,
bar, plus, star, diamond, L, T, ellipse) so a contour-based classifier can be
exercised end to end without shipping any external dataset. Generators are
fully seeded.
"""

from __future__ import annotations

import gzip
import struct

import numpy as np

SHAPE_CLASSES = (
    "disk",
    "square",
    "triangle",
    "bar",
    "plus",
    "star",
    "crescent",
    "lshape",
    "tshape",
    "ellipse",
)


def _fill_polygon(verts: np.ndarray, height: int, width: int) -> np.ndarray:
    """Even-odd rasterization of a polygon over the pixel-center grid."""
    yy, xx = np.mgrid[0:height, 0:width]
    inside = np.zeros((height, width), dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 <= yy) != (y2 <= yy)
        x_at = x1 + (yy - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (xx < x_at)
    return inside


def _polygon_vertices(kind: str, rng: np.random.Generator) -> np.ndarray:
    """Unit-scale vertex template (centered at origin, extent ~[-1, 1])."""
    if kind == "square":
        v = np.array([(-1, -1), (1, -1), (1, 1), (-1, 1)], dtype=float)
        theta = np.deg2rad(rng.uniform(-10, 10))
    elif kind == "triangle":
        ang = np.deg2rad(np.array([90, 210, 330]))
        v = np.stack([np.cos(ang), -np.sin(ang)], axis=1)
        theta = np.deg2rad(rng.uniform(-15, 15))
    elif kind == "bar":
        v = np.array([(-1, -0.3), (1, -0.3), (1, 0.3), (-1, 0.3)], dtype=float)
        theta = np.deg2rad(rng.uniform(-15, 15))
    elif kind == "plus":
        a, b = 0.34, 1.0
        v = np.array(
            [(-a, -b), (a, -b), (a, -a), (b, -a), (b, a), (a, a),
             (a, b), (-a, b), (-a, a), (-b, a), (-b, -a), (-a, -a)],
            dtype=float,
        )
        theta = np.deg2rad(rng.uniform(-10, 10))
    elif kind == "star":
        angles = np.deg2rad(90 + 36 * np.arange(10))
        radii = np.where(np.arange(10) % 2 == 0, 1.0, 0.45)
        v = np.stack([radii * np.cos(angles), -radii * np.sin(angles)], axis=1)
        theta = np.deg2rad(rng.uniform(-18, 18))
    elif kind == "lshape":
        v = np.array(
            [(-1, -1), (-0.2, -1), (-0.2, 0.2), (1, 0.2), (1, 1), (-1, 1)],
            dtype=float,
        )
        theta = np.deg2rad(rng.uniform(-12, 12))
    elif kind == "tshape":
        v = np.array(
            [(-1, -1), (1, -1), (1, -0.35), (0.32, -0.35), (0.32, 1),
             (-0.32, 1), (-0.32, -0.35), (-1, -0.35)],
            dtype=float,
        )
        theta = np.deg2rad(rng.uniform(-12, 12))
    else:
        raise ValueError(f"not a polygon class: {kind}")
    c, s = np.cos(theta), np.sin(theta)
    return v @ np.array([[c, -s], [s, c]]).T


def render_shape(kind: str, rng: np.random.Generator, size: int = 28) -> np.ndarray:
    """One light-on-dark silhouette image, uint8 (size, size)."""
    cx = size / 2 + rng.uniform(-1.5, 1.5)
    cy = size / 2 + rng.uniform(-1.5, 1.5)
    half = size * rng.uniform(0.30, 0.40)
    img = np.zeros((size, size), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    if kind == "disk":
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= half**2
    elif kind == "crescent":
        theta = np.deg2rad(rng.uniform(0, 360))
        ox = cx + 0.75 * half * np.cos(theta)
        oy = cy + 0.75 * half * np.sin(theta)
        outer = (xx - cx) ** 2 + (yy - cy) ** 2 <= half**2
        bite = (xx - ox) ** 2 + (yy - oy) ** 2 <= (0.8 * half) ** 2
        mask = outer & ~bite
    elif kind == "ellipse":
        theta = np.deg2rad(rng.uniform(-20, 20))
        dx = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
        dy = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
        mask = (dx / half) ** 2 + (dy / (0.45 * half)) ** 2 <= 1.0
    else:
        verts = _polygon_vertices(kind, rng) * half + np.array([cx, cy])
        mask = _fill_polygon(verts, size, size)
    fg = rng.integers(200, 256)
    bg = rng.integers(0, 30)
    img[:] = bg
    img[mask] = fg
    return img


def generate_shape_dataset(n: int, seed: int = 0, size: int = 28):
    """n silhouettes, labels cycling over the 10 classes. Returns
    (images uint8 (n, size, size), labels uint8 (n,))."""
    rng = np.random.default_rng(seed)
    images = np.zeros((n, size, size), dtype=np.uint8)
    labels = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        label = i % len(SHAPE_CLASSES)
        images[i] = render_shape(SHAPE_CLASSES[label], rng, size)
        labels[i] = label
    return images, labels


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path,
              compress: bool = False) -> None:
    """Write the classic big-endian IDX image/label pair (optionally gzip)."""
    n, rows, cols = images.shape
    img_blob = struct.pack(">IIII", 0x00000803, n, rows, cols) + images.astype(np.uint8).tobytes()
    lab_blob = struct.pack(">II", 0x00000801, n) + labels.astype(np.uint8).tobytes()
    if compress:
        img_blob = gzip.compress(img_blob, mtime=0)
        lab_blob = gzip.compress(lab_blob, mtime=0)
    with open(images_path, "wb") as f:
        f.write(img_blob)
    with open(labels_path, "wb") as f:
        f.write(lab_blob)


def render_blob(
    rng: np.random.Generator,
    width: int = 1600,
    height: int = 1200,
    n_harmonics: int = 6,
    dominant: int | None = None,
) -> np.ndarray:
    """Leaf-like dark blob on a light background (Fourier-series radius).

    dominant: index of the harmonic given extra weight, which acts as a
    class signature for synthetic high-resolution datasets.
    """
    cx = width / 2 + rng.uniform(-width * 0.05, width * 0.05)
    cy = height / 2 + rng.uniform(-height * 0.05, height * 0.05)
    r0 = min(width, height) * rng.uniform(0.28, 0.36)
    amps = rng.uniform(0.0, 0.08, size=n_harmonics)
    if dominant is not None:
        amps[dominant % n_harmonics] = rng.uniform(0.16, 0.22)
    phases = rng.uniform(0, 2 * np.pi, size=n_harmonics)
    angle_table = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    radius_table = np.full_like(angle_table, 1.0)
    for k in range(n_harmonics):
        radius_table += amps[k] * np.cos((k + 2) * angle_table + phases[k])
    radius_table *= r0
    yy, xx = np.mgrid[0:height, 0:width]
    theta = np.mod(np.arctan2(yy - cy, xx - cx), 2 * np.pi)
    r_lim = np.interp(theta, angle_table, radius_table, period=2 * np.pi)
    rr = np.hypot(xx - cx, yy - cy)
    mask = rr <= r_lim
    img = np.full((height, width), 235, dtype=np.uint8)
    img[mask] = 25
    return img


def generate_blob_dataset(n: int, seed: int = 0, width: int = 1600, height: int = 1200,
                          num_classes: int = 4):
    """High-resolution leaf-style set: (list of uint8 (H, W) images, labels)."""
    rng = np.random.default_rng(seed)
    images = []
    labels = []
    for i in range(n):
        label = i % num_classes
        images.append(render_blob(rng, width, height, dominant=label))
        labels.append(label)
    return images, labels


def encode_pgm(gray: np.ndarray) -> bytes:
    """Binary PGM (P5) bytes for a uint8 (H, W) array."""
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode() + gray.astype(np.uint8).tobytes()


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Binary PPM (P6) bytes for a uint8 (H, W, 3) array."""
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode() + rgb.astype(np.uint8).tobytes()
