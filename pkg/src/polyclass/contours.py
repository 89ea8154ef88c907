"""Boundary tracing of binary masks and chain approximation.

Outer borders only: one closed chain per 8-connected foreground component,
traced so the plain shoelace area is positive (counterclockwise with y read
as an ordinary second axis; on screen, with y growing downward, this renders
clockwise). Holes are ignored. The start pixel is the topmost, then leftmost
boundary pixel of the component, which makes traces bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import NoObjectError
from .geometry import Point, shoelace_area
from .image_prep import BinaryImage

APPROX_MODES = ("none", "simple", "tc89-l1", "tc89-kcos")

# Neighbor order E, SE, S, SW, W, NW, N, NE: scanning this cyclically from the
# backtrack direction keeps the object on the chain's right-hand side.
_DIRS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


@dataclass
class Contour:
    """Ordered chain of integer boundary points."""

    points: list[Point]
    closed: bool = True

    def __len__(self) -> int:
        return len(self.points)

    def array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.int64)


def _moore_trace(labels: np.ndarray, lab: int, start: Point) -> list[Point]:
    h, w = labels.shape

    def fg(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and labels[y, x] == lab

    x0, y0 = start
    chain = [start]
    backtrack = 4  # west of the start pixel is background by construction
    first_dir = -1
    for k in range(1, 9):
        d = (backtrack + k) % 8
        if fg(x0 + _DIRS[d][0], y0 + _DIRS[d][1]):
            first_dir = d
            break
    if first_dir < 0:
        return chain  # isolated pixel

    cur = (x0 + _DIRS[first_dir][0], y0 + _DIRS[first_dir][1])
    prev_dir = first_dir
    while True:
        backtrack = (prev_dir + 4) % 8
        nxt_dir = -1
        for k in range(1, 9):
            d = (backtrack + k) % 8
            if fg(cur[0] + _DIRS[d][0], cur[1] + _DIRS[d][1]):
                nxt_dir = d
                break
        # cur has at least one foreground neighbor (the one we came from)
        if cur == start and nxt_dir == first_dir:
            break  # about to repeat the opening move: cycle closed
        chain.append(cur)
        cur = (cur[0] + _DIRS[nxt_dir][0], cur[1] + _DIRS[nxt_dir][1])
        prev_dir = nxt_dir
    return chain


def trace_contours(mask: BinaryImage) -> list[Contour]:
    """Trace the outer border of every 8-connected foreground component."""
    labels, nlab = ndimage.label(mask.mask, structure=np.ones((3, 3), dtype=int))
    contours = []
    for lab in range(1, nlab + 1):
        ys, xs = np.nonzero(labels == lab)
        start = (int(xs[0]), int(ys[0]))  # row-major order: topmost, then leftmost
        contours.append(Contour(_moore_trace(labels, lab, start), closed=True))
    return contours


def select_main_contour(contours: list[Contour]) -> Contour:
    """Largest enclosed area; ties go to the longer chain, then trace order."""
    if not contours:
        raise NoObjectError("no contours to select from")
    best = contours[0]
    best_key = (abs(shoelace_area(best.points)), len(best))
    for c in contours[1:]:
        key = (abs(shoelace_area(c.points)), len(c))
        if key > best_key:
            best, best_key = c, key
    return best


def _chain_dir(a: Point, b: Point) -> Point:
    return (b[0] - a[0], b[1] - a[1])


def _approx_simple(points: list[Point], closed: bool) -> list[Point]:
    n = len(points)
    keep = []
    for i in range(n):
        if not closed and (i == 0 or i == n - 1):
            keep.append(i)
            continue
        d_in = _chain_dir(points[(i - 1) % n], points[i])
        d_out = _chain_dir(points[i], points[(i + 1) % n])
        if d_in != d_out:
            keep.append(i)
    if closed and 0 not in keep:
        keep.insert(0, 0)
    return [points[i] for i in keep]


@dataclass
class TehChinParams:
    """Pinned parameterization of the dominant-point chain approximation.

    d_bound is the straightness corridor: the region of support around a
    point keeps growing while every arc point stays within d_bound of the
    chord and the chord keeps lengthening.
    """

    d_bound: float = 1.0
    max_support: int = 64


def _chord_len_sq(a: Point, b: Point) -> int:
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    return dx * dx + dy * dy


def _arc_dmax_sq_ratio(points: list[Point], i: int, k: int, n: int, closed: bool) -> float:
    """max over the arc of squared perpendicular distance to the chord."""
    a = points[(i - k) % n] if closed else points[i - k]
    b = points[(i + k) % n] if closed else points[i + k]
    ex = b[0] - a[0]
    ey = b[1] - a[1]
    len_sq = ex * ex + ey * ey
    worst = 0
    for off in range(-k + 1, k):
        p = points[(i + off) % n] if closed else points[i + off]
        cr = (p[0] - a[0]) * ey - (p[1] - a[1]) * ex
        cr = cr * cr
        if cr > worst:
            worst = cr
    if len_sq == 0:
        return 0.0 if worst == 0 else math.inf
    return worst / len_sq


def region_of_support(
    points: list[Point], i: int, n: int, closed: bool, params: TehChinParams
) -> int:
    """Grow k while the chord lengthens and the arc stays within d_bound."""
    if closed:
        kmax = min((n - 2) // 2, params.max_support)
    else:
        kmax = min(i, n - 1 - i, params.max_support)
    if kmax < 1:
        return 0
    k = 1
    d_bound_sq = params.d_bound * params.d_bound
    prev_len = _chord_len_sq(
        points[(i - 1) % n] if closed else points[i - 1],
        points[(i + 1) % n] if closed else points[i + 1],
    )
    while k + 1 <= kmax:
        a = points[(i - k - 1) % n] if closed else points[i - k - 1]
        b = points[(i + k + 1) % n] if closed else points[i + k + 1]
        nxt_len = _chord_len_sq(a, b)
        if nxt_len <= prev_len:
            break
        if _arc_dmax_sq_ratio(points, i, k + 1, n, closed) > d_bound_sq:
            break
        prev_len = nxt_len
        k += 1
    return k


def _k_cosine(points: list[Point], i: int, k: int, n: int, closed: bool) -> float:
    p = points[i]
    a = points[(i + k) % n] if closed else points[i + k]
    b = points[(i - k) % n] if closed else points[i - k]
    ax, ay = a[0] - p[0], a[1] - p[1]
    bx, by = b[0] - p[0], b[1] - p[1]
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na == 0 or nb == 0:
        return -1.0
    return (ax * bx + ay * by) / (na * nb)


def _l1_deviation(points: list[Point], i: int, k: int, n: int, closed: bool) -> float:
    """L1 norm of the center point's perpendicular offset from the support
    chord. (A plain sum over the arc grows with support size and peaks next
    to corners instead of on them.)"""
    a = points[(i - k) % n] if closed else points[i - k]
    b = points[(i + k) % n] if closed else points[i + k]
    ex = b[0] - a[0]
    ey = b[1] - a[1]
    len_sq = ex * ex + ey * ey
    if len_sq == 0:
        return 0.0
    p = points[i]
    px, py = p[0] - a[0], p[1] - a[1]
    t = (px * ex + py * ey) / len_sq
    ox = px - t * ex
    oy = py - t * ey
    return abs(ox) + abs(oy)


def teh_chin_dominant(
    points: list[Point], closed: bool, measure: str, params: TehChinParams | None = None
) -> list[int]:
    """Region-of-support + significance + non-maxima suppression.

    measure: 'l1' (L1 deviation of the point from its support chord) or
    'kcos' (k-cosine at the support arms). Points whose support arc is
    exactly straight are never dominant. Index 0 (and the last index on
    open chains) is always kept.
    """
    params = params or TehChinParams()
    n = len(points)
    ks = [region_of_support(points, i, n, closed, params) for i in range(n)]
    sig = [-math.inf] * n
    candidate = [False] * n
    for i in range(n):
        k = ks[i]
        if k < 1:
            continue
        if _arc_dmax_sq_ratio(points, i, k, n, closed) == 0.0:
            continue  # straight support: not a corner
        candidate[i] = True
        if measure == "kcos":
            sig[i] = _k_cosine(points, i, k, n, closed)
        else:
            sig[i] = _l1_deviation(points, i, k, n, closed)

    keep = []
    for i in range(n):
        if not candidate[i]:
            continue
        k = max(1, ks[i])
        survives = True
        for off in range(-k, k + 1):
            if off == 0:
                continue
            j = (i + off) % n if closed else i + off
            if not closed and not 0 <= j < n:
                continue
            if sig[j] > sig[i] or (sig[j] == sig[i] and j < i):
                survives = False
                break
        if survives:
            keep.append(i)

    forced = {0, n - 1} if not closed else {0}
    out = sorted(set(keep) | forced)
    return out


def approximate(c: Contour, mode: str, params: TehChinParams | None = None) -> Contour:
    """Simplify a full chain with one of the four approximation modes."""
    mode = mode.lower()
    if mode not in APPROX_MODES:
        raise ValueError(f"unknown approximation mode {mode!r}")
    if mode == "none" or len(c) < 3:
        return Contour(list(c.points), closed=c.closed)
    if mode == "simple":
        return Contour(_approx_simple(c.points, c.closed), closed=c.closed)
    measure = "l1" if mode == "tc89-l1" else "kcos"
    idx = teh_chin_dominant(c.points, c.closed, measure, params)
    return Contour([c.points[i] for i in idx], closed=c.closed)


def contours_to_svg(
    contours: list[Contour],
    width: int,
    height: int,
    overlay: list[Point] | None = None,
) -> str:
    """Debug SVG: gray polyline per contour, optional red overlay polygon."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">'
    ]
    for c in contours:
        pts = " ".join(f"{x},{y}" for x, y in c.points)
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="#888" stroke-width="0.5"/>'
        )
    if overlay:
        pts = " ".join(f"{x},{y}" for x, y in overlay)
        parts.append(
            f'<polygon points="{pts}" fill="none" stroke="#d00" stroke-width="0.8"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
