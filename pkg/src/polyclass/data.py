"""Dataset ingestion, point-sequence preprocessing, caching and augmentation.

Two ingestion paths: IDX files (the MNIST byte layout, gzip optional) and a
folder-per-class image tree. Preprocessing turns each image into one of the
five point representations and appends a JSON record per sample to a cache
file, so training never touches images again.
"""

from __future__ import annotations

import gzip
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contours import approximate
from .errors import DatasetError, DatasetQualityError, IdxFormatError, NoObjectError
from .image_prep import GrayImage, Image, decode_image
from .matc import MatcParams, contour_from_image, dominant_polygon

log = logging.getLogger(__name__)

REPRESENTATIONS = (
    "dominant-points",
    "contours-none",
    "contours-simple",
    "contours-tc89l1",
    "contours-tc89kcos",
)

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801
_IMAGE_SUFFIXES = (".png", ".pgm", ".ppm")


@dataclass
class Sample:
    source: str
    points: np.ndarray  # (N, 2) normalized float64
    label: int


@dataclass
class Dataset:
    samples: list[Sample]
    class_names: list[str]
    split: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def _read_maybe_gzip(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def load_idx(images_path, labels_path) -> list[tuple[GrayImage, int, str]]:
    """Load an IDX image/label pair; returns (image, label, source-id) rows."""
    img_data = _read_maybe_gzip(images_path)
    lab_data = _read_maybe_gzip(labels_path)
    if len(img_data) < 16:
        raise IdxFormatError(f"{images_path}: truncated header ({len(img_data)} bytes)")
    magic, count, rows, cols = struct.unpack(">IIII", img_data[:16])
    if magic != _IDX_IMAGES_MAGIC:
        raise IdxFormatError(
            f"{images_path}: magic mismatch (got 0x{magic:08x}, want 0x{_IDX_IMAGES_MAGIC:08x})"
        )
    expected = 16 + count * rows * cols
    if len(img_data) < expected:
        raise IdxFormatError(
            f"{images_path}: truncated payload (need {expected} bytes, got {len(img_data)})"
        )
    if len(lab_data) < 8:
        raise IdxFormatError(f"{labels_path}: truncated header ({len(lab_data)} bytes)")
    lmagic, lcount = struct.unpack(">II", lab_data[:8])
    if lmagic != _IDX_LABELS_MAGIC:
        raise IdxFormatError(
            f"{labels_path}: magic mismatch (got 0x{lmagic:08x}, want 0x{_IDX_LABELS_MAGIC:08x})"
        )
    if lcount != count:
        raise IdxFormatError(
            f"image/label count mismatch: {count} images vs {lcount} labels"
        )
    if len(lab_data) < 8 + lcount:
        raise IdxFormatError(f"{labels_path}: truncated payload")
    pixels = np.frombuffer(img_data, dtype=np.uint8, count=count * rows * cols, offset=16)
    pixels = pixels.reshape(count, rows, cols)
    labels = np.frombuffer(lab_data, dtype=np.uint8, count=count, offset=8)
    return [
        (GrayImage(pixels[i].copy()), int(labels[i]), f"idx:{i}")
        for i in range(count)
    ]


def load_image_folder(root_path) -> tuple[list[tuple[Image, int, str]], list[str]]:
    """Folder-per-class tree -> (image, label, source) rows plus class names.

    Classes are the subdirectory names sorted lexicographically; non-image
    files are skipped with a warning.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise DatasetError(f"dataset root {root} has no class subdirectories")
    rows = []
    class_names = []
    for label, cdir in enumerate(class_dirs):
        class_names.append(cdir.name)
        files = sorted(cdir.iterdir())
        n_loaded = 0
        for f in files:
            if not f.is_file():
                continue
            if f.suffix.lower() not in _IMAGE_SUFFIXES:
                log.warning("skipping non-image file %s", f)
                continue
            rows.append((decode_image(f.read_bytes()), label, str(f.relative_to(root))))
            n_loaded += 1
        if n_loaded == 0:
            raise DatasetError(f"class folder {cdir} contains no images")
    return rows, class_names


def normalize_points(points, width: int, height: int) -> np.ndarray:
    """(x, y) -> (x/W, y/H) into the unit square, each axis independently."""
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1")
    arr = np.asarray(points, dtype=np.float64)
    return arr / np.asarray([width, height], dtype=np.float64)


@dataclass
class AugmentPolicy:
    rotation_deg: float = 30.0
    p_hflip: float = 0.5
    p_vflip: float = 0.5


def augment(points: np.ndarray, rng: np.random.Generator, policy: AugmentPolicy | None = None) -> np.ndarray:
    """Random rotation about the centroid, then independent axis flips.

    Consumes exactly three rng draws per call so training trajectories are
    reproducible. Output is clamped back into the unit square.
    """
    policy = policy or AugmentPolicy()
    theta = np.deg2rad(rng.uniform(-policy.rotation_deg, policy.rotation_deg))
    do_h = rng.random() < policy.p_hflip
    do_v = rng.random() < policy.p_vflip
    centroid = points.mean(axis=0)
    centered = points - centroid
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    out = centered @ rot.T
    if do_h:
        out[:, 0] = -out[:, 0]
    if do_v:
        out[:, 1] = -out[:, 1]
    return np.clip(out + centroid, 0.0, 1.0)


def points_from_image(img, representation: str, params: MatcParams):
    """One image -> integer contour/polygon points plus (W, H)."""
    main, width, height = contour_from_image(img, params)
    if representation == "dominant-points":
        pts = dominant_polygon(main, params).points
    elif representation == "contours-none":
        pts = main.points
    elif representation == "contours-simple":
        pts = approximate(main, "simple").points
    elif representation == "contours-tc89l1":
        pts = approximate(main, "tc89-l1").points
    elif representation == "contours-tc89kcos":
        pts = approximate(main, "tc89-kcos").points
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return pts, width, height


def preprocess_dataset(
    raw_rows,
    representation: str,
    params: MatcParams | None = None,
    class_names: list[str] | None = None,
    cache_path=None,
    split: str = "",
    max_skip_fraction: float = 0.10,
) -> Dataset:
    """Convert raw (image, label, source) rows to normalized point sequences.

    Failures are skipped with a log line; more than max_skip_fraction skips
    aborts the run. When cache_path is given, one JSON record per sample is
    written (and the function is a pure producer: reading the cache back
    yields bit-identical data).
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    params = params or MatcParams()
    samples = []
    skipped = 0
    for img, label, source in raw_rows:
        try:
            pts, w, h = points_from_image(img, representation, params)
            if len(pts) < 3:
                raise NoObjectError("fewer than 3 points")
            norm = normalize_points(pts, w, h)
        except Exception as exc:  # per-sample guard: skip and account
            skipped += 1
            log.warning("skipping %s: %s", source, exc)
            continue
        samples.append(Sample(source=source, points=norm, label=label))
    total = len(raw_rows)
    if total and skipped > max_skip_fraction * total:
        raise DatasetQualityError(
            f"{skipped}/{total} samples failed preprocessing (> {max_skip_fraction:.0%})"
        )
    if class_names is None:
        n_classes = max((s.label for s in samples), default=-1) + 1
        class_names = [str(i) for i in range(n_classes)]
    ds = Dataset(samples=samples, class_names=class_names, split=split)
    if cache_path is not None:
        write_cache(ds, representation, cache_path)
    return ds


def write_cache(ds: Dataset, representation: str, path) -> None:
    """One JSON object per line; floats serialized via repr so the round
    trip is bit-exact."""
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "kind": "polyclass-points-cache",
            "representation": representation,
            "class_names": ds.class_names,
            "split": ds.split,
        }
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for s in ds.samples:
            rec = {
                "source": s.source,
                "label": s.label,
                "representation": representation,
                "points": [[float(x), float(y)] for x, y in s.points],
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_cache(path) -> tuple[Dataset, str]:
    """Read a points cache; returns (Dataset, representation)."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetError(f"cache {path} is empty")
    header = json.loads(lines[0])
    if header.get("kind") != "polyclass-points-cache":
        raise DatasetError(f"cache {path} has unexpected header")
    samples = []
    for line in lines[1:]:
        if not line.strip():
            continue
        rec = json.loads(line)
        samples.append(
            Sample(
                source=rec["source"],
                points=np.asarray(rec["points"], dtype=np.float64),
                label=int(rec["label"]),
            )
        )
    ds = Dataset(
        samples=samples,
        class_names=list(header["class_names"]),
        split=header.get("split", ""),
    )
    return ds, header["representation"]


def stratified_split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded stratified carve-out: returns (rest, carved)."""
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(ds.samples):
        by_class.setdefault(s.label, []).append(i)
    carved_idx = []
    for label in sorted(by_class):
        idxs = np.asarray(by_class[label])
        perm = rng.permutation(len(idxs))
        n_take = max(1, int(round(fraction * len(idxs)))) if len(idxs) > 1 else 0
        carved_idx.extend(idxs[perm[:n_take]].tolist())
    carved_set = set(carved_idx)
    rest = [s for i, s in enumerate(ds.samples) if i not in carved_set]
    carved = [ds.samples[i] for i in sorted(carved_set)]
    return (
        Dataset(rest, ds.class_names, ds.split),
        Dataset(carved, ds.class_names, "val"),
    )
