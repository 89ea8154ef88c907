"""Exact 2-D geometry primitives shared by the contour and cover code.

All hull arithmetic is done on integer pixel coordinates, so orientation
tests are exact. Widths are only converted to floats at the final
comparison/reporting step.
"""

from __future__ import annotations

import math

Point = tuple[int, int]


def cross(o: Point, a: Point, b: Point) -> int:
    """Signed area parallelogram (o->a) x (o->b). Positive = left turn."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list[Point]:
    """Monotone-chain convex hull, counterclockwise, collinear points dropped.

    Duplicates are tolerated. Returns 1 point for a degenerate cloud and the
    two extreme endpoints for a collinear cloud.
    """
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def hull_width(hull: list[Point]) -> float:
    """Minimal width of a convex polygon over all directions.

    The minimum is attained flush against one of the edges, so we take
    min over edges of the max vertex distance to the edge's line.
    """
    h = len(hull)
    if h <= 2:
        return 0.0
    best = math.inf
    for i in range(h):
        a = hull[i]
        b = hull[(i + 1) % h]
        ex = b[0] - a[0]
        ey = b[1] - a[1]
        len_sq = ex * ex + ey * ey
        if len_sq == 0:
            continue
        max_cr = 0
        for v in hull:
            cr = abs((v[0] - a[0]) * ey - (v[1] - a[1]) * ex)
            if cr > max_cr:
                max_cr = cr
        w = max_cr / math.sqrt(len_sq)
        if w < best:
            best = w
    return 0.0 if best is math.inf else best


def hull_width_leq(hull: list[Point], nu: float) -> bool:
    """Exact test hull_width(hull) <= nu using integer cross products.

    Equivalent to comparing squared distances: exists an edge with
    max_cross^2 <= nu^2 * edge_len^2. Integer cross products stay exact in
    float64 at image scale, so this is deterministic and reproducible.
    """
    h = len(hull)
    if h <= 2:
        return nu >= 0.0
    nu_sq = nu * nu
    for i in range(h):
        a = hull[i]
        b = hull[(i + 1) % h]
        ex = b[0] - a[0]
        ey = b[1] - a[1]
        len_sq = ex * ex + ey * ey
        if len_sq == 0:
            continue
        max_cr = 0
        for v in hull:
            cr = abs((v[0] - a[0]) * ey - (v[1] - a[1]) * ex)
            if cr > max_cr:
                max_cr = cr
        if max_cr * max_cr <= nu_sq * len_sq:
            return True
    return False


def _point_in_hull(hull: list[Point], p: Point) -> bool:
    h = len(hull)
    if h == 0:
        return False
    if h == 1:
        return p == hull[0]
    if h == 2:
        a, b = hull
        if cross(a, b, p) != 0:
            return False
        return (
            min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
        )
    for i in range(h):
        if cross(hull[i], hull[(i + 1) % h], p) < 0:
            return False
    return True


class RangeHull:
    """Convex hull of a sliding index range, maintained incrementally.

    append() updates the hull in O(h) for interior points and rebuilds from
    hull+point otherwise; popleft() rebuilds only when the removed point was
    a hull vertex. Hull sizes on digital curves are tiny, so this is cheap.
    """

    def __init__(self, points=()):
        self.points: list[Point] = list(points)
        self.hull: list[Point] = convex_hull(self.points) if self.points else []

    def append(self, p: Point) -> None:
        self.points.append(p)
        if not _point_in_hull(self.hull, p):
            self.hull = convex_hull(self.hull + [p])

    def popleft(self) -> None:
        old = self.points.pop(0)
        if old in self.points:
            return
        if old in self.hull:
            self.hull = convex_hull(self.points) if self.points else []

    def width_leq(self, nu: float) -> bool:
        return hull_width_leq(self.hull, nu)

    def width(self) -> float:
        return hull_width(self.hull)


def range_width(points) -> float:
    """Brute-force width of a point set: fresh hull + edge sweep."""
    return hull_width(convex_hull(points))


def shoelace_area(points) -> float:
    """Signed polygon area; positive for counterclockwise order (y treated
    as a plain second coordinate)."""
    n = len(points)
    s = 0
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s / 2.0


def point_segment_dist_sq(p, a, b) -> float:
    """Squared Euclidean distance from p to segment a-b."""
    px, py = p
    ax, ay = a
    bx, by = b
    dx = bx - ax
    dy = by - ay
    len_sq = dx * dx + dy * dy
    if len_sq == 0:
        ex = px - ax
        ey = py - ay
        return float(ex * ex + ey * ey)
    t = ((px - ax) * dx + (py - ay) * dy) / len_sq
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return ex * ex + ey * ey
