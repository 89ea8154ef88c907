"""Dominant-point extraction via adaptive tangential covers of digital curves.

A blurred segment of width nu is a run of consecutive contour points whose
convex hull is thinner than nu (minimal width over all directions). The
tangential cover is the ordered family of maximal such runs; corners live in
the overlap zones of consecutive runs. Per-point widths come from a
"meaningful thickness" noise ladder, so noisy stretches get wider segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .contours import Contour, select_main_contour, trace_contours
from .errors import DegenerateCoverError, DegeneratePolygonError
from .geometry import (
    Point,
    RangeHull,
    _point_in_hull,
    convex_hull,
    hull_width_leq,
    point_segment_dist_sq,
)
from .image_prep import (
    GrayImage,
    Image,
    default_denoise_radius,
    denoise,
    otsu_threshold,
    to_grayscale,
)

DEFAULT_LADDER = (1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass
class MaximalBlurredSegment:
    """Inclusive index range [start, end] (modular on closed contours) whose
    hull width is <= width, inextensible on either side."""

    start: int
    end: int
    width: float

    def length(self, n: int) -> int:
        return (self.end - self.start) % n + 1

    def indices(self, n: int) -> list[int]:
        return [(self.start + k) % n for k in range(self.length(n))]


@dataclass
class TangentialCover:
    segments: list[MaximalBlurredSegment]
    n: int
    closed: bool = True

    def covers_all(self) -> bool:
        seen = [False] * self.n
        for seg in self.segments:
            for i in seg.indices(self.n):
                seen[i] = True
        return all(seen)


@dataclass
class Polygon:
    """Ordered subset of contour points used as the compact representation."""

    vertex_indices: list[int]
    points: list[Point]

    def __len__(self) -> int:
        return len(self.vertex_indices)


@dataclass
class PolygonQuality:
    isse: float
    cr: float


@dataclass
class MatcParams:
    polarity: str = "auto"
    denoise_radius: int | None = None  # None: resolution-scaled default
    nu_mode: str = "adaptive"  # 'adaptive' or 'fixed'
    nu: float = 1.4  # width used in 'fixed' mode
    ladder: tuple[float, ...] = DEFAULT_LADDER
    growth_threshold: float = 1.2
    atc_max_iters: int = 3
    min_separation: float = 2.0
    min_contour_points: int = 8


class _Window(RangeHull):
    """RangeHull with a non-mutating extension test."""

    def try_append(self, p: Point, nu: float) -> bool:
        if not self.points:
            self.points.append(p)
            self.hull = [p]
            return True
        if p in self.points or _point_in_hull(self.hull, p):
            self.points.append(p)
            return True
        tentative = convex_hull(self.hull + [p])
        if hull_width_leq(tentative, nu):
            self.points.append(p)
            self.hull = tentative
            return True
        return False


def _sweep_uniform(points: list[Point], nu: float, closed: bool) -> list[tuple[int, int]]:
    """Two-pointer sweep: unrolled (start, end) of the maximal run per start.

    Ends are non-decreasing (a sub-range of a fitting range fits), so the
    window only ever advances.
    """
    n = len(points)
    win = _Window()
    ends = []
    e = 0  # next absolute index to try; window holds [s, e-1]
    for s in range(n):
        if e == s:
            win.try_append(points[s % n], nu)
            e = s + 1
        cap = s + n if closed else n
        while e < cap and win.try_append(points[e % n], nu):
            e += 1
        ends.append(e - 1)
        if closed and e - s == n:
            return [(s, e - 1)]  # whole contour fits: single segment
        win.popleft()
    return list(enumerate(ends))


def _filter_maximal(cands: list[tuple[int, int]], n: int, closed: bool):
    """Drop candidate runs contained in another (unrolled-interval check)."""
    if len(cands) == 1:
        return cands
    if not closed:
        kept = []
        prev_end = -1
        for s, e in cands:
            if e > prev_end:
                kept.append((s, e))
                prev_end = e
        return kept
    # closed: sliding-window max of unrolled ends over the n-1 predecessors
    ends = {s: e for s, e in cands}
    kept = []
    from collections import deque

    dq: deque[tuple[int, int]] = deque()  # (position j, unrolled end)
    for j in range(2 * n):
        s = j % n
        u = ends[s] + (n if j >= n else 0)
        if j >= n:
            while dq and dq[0][0] < j - n + 1:
                dq.popleft()
            contained = bool(dq) and dq[0][1] >= u
            if not contained:
                kept.append((s, ends[s]))
        while dq and dq[-1][1] <= u:
            dq.pop()
        dq.append((j, u))
    kept.sort()
    return kept


def recognize_mbs(c: Contour, nu: float, closed: bool | None = None) -> list[MaximalBlurredSegment]:
    """All maximal width-nu blurred segments of the chain, sorted by start."""
    if len(c) < 2:
        raise ValueError("need at least 2 points to recognize segments")
    if nu <= 0:
        raise ValueError("nu must be positive")
    is_closed = c.closed if closed is None else closed
    n = len(c)
    cands = _sweep_uniform(c.points, nu, is_closed)
    kept = _filter_maximal(cands, n, is_closed)
    return [MaximalBlurredSegment(s, e % n, nu) for s, e in kept]


def _longest_through(segs: list[tuple[int, int]], n: int) -> list[int]:
    longest = [1] * n
    for s, e in segs:
        length = e - s + 1
        for j in range(s, e + 1):
            idx = j % n
            if length > longest[idx]:
                longest[idx] = length
    return longest


def meaningful_thickness_all(
    c: Contour,
    ladder: tuple[float, ...] = DEFAULT_LADDER,
    growth_threshold: float = 1.2,
) -> list[float]:
    """Per-index noise width: the first ladder rung where the longest
    blurred segment through the point stops growing sub-linearly."""
    if list(ladder) != sorted(ladder) or ladder[0] <= 0:
        raise ValueError("ladder must be ascending and positive")
    n = len(c)
    if n <= 2:
        return [ladder[0]] * n
    tables = []
    for nu in ladder:
        cands = _sweep_uniform(c.points, nu, c.closed)
        kept = _filter_maximal(cands, n, c.closed)
        tables.append(_longest_through(kept, n))
    result = []
    for i in range(n):
        chosen = ladder[-1]
        for k in range(len(ladder) - 1):
            if tables[k + 1][i] < growth_threshold * tables[k][i]:
                chosen = ladder[k]
                break
        result.append(chosen)
    return result


def meaningful_thickness(
    c: Contour,
    i: int,
    ladder: tuple[float, ...] = DEFAULT_LADDER,
    growth_threshold: float = 1.2,
) -> float:
    return meaningful_thickness_all(c, ladder, growth_threshold)[i]


def adaptive_tangential_cover(
    c: Contour, per_index_nu: list[float], max_iters: int = 3
) -> TangentialCover:
    """Cover by maximal segments whose width follows the local noise widths.

    Each start grows at its own width, then widens to the max width spanned
    and re-grows, to a fixed point (bounded by max_iters widening rounds).
    """
    n = len(c)
    if len(per_index_nu) != n:
        raise ValueError("per_index_nu length must match contour length")
    if len(set(per_index_nu)) == 1:
        segs = recognize_mbs(c, per_index_nu[0])
        return TangentialCover(segs, n, c.closed)

    points = c.points
    cands: list[tuple[int, int, float]] = []
    for s in range(n):
        w = per_index_nu[s]
        win = _Window()
        win.try_append(points[s], w)
        e = s + 1
        cap = s + n if c.closed else n
        iters = 0
        while True:
            while e < cap and win.try_append(points[e % n], w):
                e += 1
            w2 = max(per_index_nu[j % n] for j in range(s, e))
            if w2 <= w or iters >= max_iters:
                break
            w = w2
            iters += 1
        cands.append((s, e - 1, w))
        if c.closed and e - s == n:
            return TangentialCover([MaximalBlurredSegment(s, (e - 1) % n, w)], n, c.closed)

    kept = _filter_maximal([(s, e) for s, e, _ in cands], n, c.closed)
    widths = {s: w for s, e, w in cands}
    segs = [MaximalBlurredSegment(s, e % n, widths[s]) for s, e in kept]
    return TangentialCover(segs, n, c.closed)


def _angle_cos(l_pt: Point, p: Point, r_pt: Point) -> float:
    ax, ay = l_pt[0] - p[0], l_pt[1] - p[1]
    bx, by = r_pt[0] - p[0], r_pt[1] - p[1]
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na == 0 or nb == 0:
        return -1.0  # degenerate arm: treat as flat, never a corner
    return (ax * bx + ay * by) / (na * nb)


def detect_dominant_points(c: Contour, cover: TangentialCover) -> list[int]:
    """Sharpest point of each overlap zone of consecutive cover segments.

    The pseudo-curvature at a zone point p is the angle subtended by the
    outer endpoints of the two segments; the zone's dominant point minimizes
    that angle (maximizes its cosine). Ties go to the smaller contour index.
    """
    n = cover.n
    segs = cover.segments
    if len(segs) < 2:
        if c.closed:
            raise DegenerateCoverError(
                "cover has a single segment; contour is a straight band with no corners"
            )
        return []
    points = c.points
    found: set[int] = set()
    pair_count = len(segs) if c.closed else len(segs) - 1
    for k in range(pair_count):
        a = segs[k]
        b = segs[(k + 1) % len(segs)]
        zone_len = (a.end - b.start) % n + 1
        span_a = a.length(n)
        span_b_start_off = (b.start - a.start) % n
        if span_b_start_off >= span_a:
            continue  # no overlap (cannot happen on a valid cover; guard anyway)
        l_pt = points[a.start]
        r_pt = points[b.end]
        best_idx = -1
        best_cos = -math.inf
        for off in range(zone_len):
            idx = (b.start + off) % n
            cs = _angle_cos(l_pt, points[idx], r_pt)
            if cs > best_cos or (cs == best_cos and idx < best_idx):
                best_cos = cs
                best_idx = idx
        if best_idx >= 0:
            found.add(best_idx)
    return sorted(found)


def polygon_quality(c: Contour, p: Polygon) -> PolygonQuality:
    """ISSE (sum of squared point-to-bracketing-edge distances) and CR."""
    n_vertices = len(p.vertex_indices)
    if n_vertices < 2:
        raise DegeneratePolygonError("polygon needs at least 2 vertices")
    n = len(c)
    isse = 0.0
    edge_count = n_vertices if c.closed else n_vertices - 1
    for j in range(edge_count):
        v0 = p.vertex_indices[j]
        v1 = p.vertex_indices[(j + 1) % n_vertices]
        a = c.points[v0]
        b = c.points[v1]
        span = (v1 - v0) % n if c.closed else v1 - v0
        for off in range(span + 1):
            isse += point_segment_dist_sq(c.points[(v0 + off) % n], a, b)
    return PolygonQuality(isse=isse, cr=n / n_vertices)


def _pseudo_curvature_rank(c: Contour, pool: list[int]) -> list[int]:
    """Pool indices ranked sharpest-first with fixed arms (floor-guard only)."""
    n = len(c)
    k = max(1, n // 16)
    scored = []
    for i in pool:
        cs = _angle_cos(c.points[(i - k) % n], c.points[i], c.points[(i + k) % n])
        scored.append((-cs, i))
    scored.sort()
    return [i for _, i in scored]


def simplify_polygon(c: Contour, dp: list[int], min_separation: float = 2.0) -> Polygon:
    """Greedy sweep dropping points closer than min_separation to the last
    kept one. Closed contours are floored at 3 vertices (sharpest points)."""
    n = len(c)
    if not c.closed:
        dp = sorted(set(dp) | {0, n - 1})
    if not dp:
        dp = [0]
    min_sep_sq = min_separation * min_separation
    kept = [dp[0]]
    for idx in dp[1:]:
        ax, ay = c.points[kept[-1]]
        bx, by = c.points[idx]
        if (bx - ax) ** 2 + (by - ay) ** 2 >= min_sep_sq:
            kept.append(idx)
    if c.closed and len(kept) < 3:
        pool = dp if len(dp) >= 3 else list(range(n))
        kept = sorted(_pseudo_curvature_rank(c, pool)[:3])
    return Polygon(kept, [c.points[i] for i in kept])


def _edge_sse(c: Contour, v0: int, v1: int) -> float:
    n = len(c)
    a = c.points[v0]
    b = c.points[v1]
    span = (v1 - v0) % n if c.closed else v1 - v0
    total = 0.0
    for off in range(span + 1):
        total += point_segment_dist_sq(c.points[(v0 + off) % n], a, b)
    return total


def optimize_polygon(c: Contour, p: Polygon) -> Polygon:
    """Remove the cheapest vertices while the figure of merit
    CR / max(ISSE, 1) strictly increases; never below 3 vertices."""
    verts = list(p.vertex_indices)
    if len(verts) < 4:
        return Polygon(verts, [c.points[i] for i in verts])
    n_contour = len(c)
    isse = polygon_quality(c, p).isse

    while len(verts) > 3:
        m = len(verts)
        best_j = -1
        best_delta = math.inf
        best_vertex = -1
        for j in range(m):
            if not c.closed and (j == 0 or j == m - 1):
                continue
            prev_v = verts[(j - 1) % m]
            here = verts[j]
            next_v = verts[(j + 1) % m]
            local_now = _edge_sse(c, prev_v, here) + _edge_sse(c, here, next_v)
            local_removed = _edge_sse(c, prev_v, next_v)
            delta = local_removed - local_now
            if delta < best_delta or (delta == best_delta and here < best_vertex):
                best_delta = delta
                best_j = j
                best_vertex = here
        if best_j < 0:
            break
        fom_now = (n_contour / m) / max(isse, 1.0)
        new_isse = isse + best_delta
        fom_next = (n_contour / (m - 1)) / max(new_isse, 1.0)
        if fom_next > fom_now:
            verts.pop(best_j)
            isse = new_isse
        else:
            break
    return Polygon(verts, [c.points[i] for i in verts])


def contour_from_image(img, params: MatcParams) -> tuple[Contour, int, int]:
    """Shared front half of the pipeline: image -> main contour (+ W, H).

    Accepts an Image or a GrayImage.
    """
    if isinstance(img, GrayImage):
        img = Image(img.pixels[:, :, None].copy())
    gray = to_grayscale(img)
    binary = otsu_threshold(gray, params.polarity)
    radius = (
        params.denoise_radius
        if params.denoise_radius is not None
        else default_denoise_radius(img.width, img.height)
    )
    clean = denoise(binary, radius)
    contours = trace_contours(clean)
    contours = [c for c in contours if len(c) >= params.min_contour_points]
    main = select_main_contour(contours)
    return main, img.width, img.height


def dominant_polygon(c: Contour, params: MatcParams) -> Polygon:
    """Contour -> optimized dominant-point polygon (back half of MATC)."""
    if params.nu_mode == "fixed":
        per_index = [params.nu] * len(c)
    else:
        per_index = meaningful_thickness_all(c, params.ladder, params.growth_threshold)
    cover = adaptive_tangential_cover(c, per_index, params.atc_max_iters)
    dp = detect_dominant_points(c, cover)
    poly = simplify_polygon(c, dp, params.min_separation)
    return optimize_polygon(c, poly)


def extract_dominant_points(img: Image, params: MatcParams | None = None) -> Polygon:
    """Full image -> dominant-point polygon composition. Deterministic."""
    params = params or MatcParams()
    main, _, _ = contour_from_image(img, params)
    return dominant_polygon(main, params)
