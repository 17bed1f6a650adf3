"""Small shared polygon helpers (pure, numpy-free where possible)."""

from __future__ import annotations

import math

Point = tuple[float, float]


def signed_area(polygon: list[Point]) -> float:
    """Shoelace signed area; positive for counter-clockwise rings."""
    acc = 0.0
    n = len(polygon)
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return acc / 2.0


def polygon_area(polygon: list[Point]) -> float:
    return abs(signed_area(polygon))


def ensure_ccw(polygon: list[Point]) -> list[Point]:
    return polygon if signed_area(polygon) >= 0 else polygon[::-1]


def polygon_perimeter(polygon: list[Point]) -> float:
    n = len(polygon)
    return sum(math.dist(polygon[i], polygon[(i + 1) % n]) for i in range(n))


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.dist(p, a)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / denom
    t = max(0.0, min(1.0, t))
    return math.dist(p, (ax + t * dx, ay + t * dy))


def point_polygon_boundary_distance(p: Point, polygon: list[Point]) -> float:
    n = len(polygon)
    return min(point_segment_distance(p, polygon[i], polygon[(i + 1) % n])
               for i in range(n))


def interior_angle_deg(prev: Point, vertex: Point, nxt: Point) -> float:
    """Interior angle at ``vertex`` of a CCW polygon, in [0, 360)."""
    ax, ay = prev[0] - vertex[0], prev[1] - vertex[1]
    bx, by = nxt[0] - vertex[0], nxt[1] - vertex[1]
    ang = math.degrees(math.atan2(ax * by - ay * bx, ax * bx + ay * by))
    # CCW ring: interior lies left of vertex->next, angle from next-arm to
    # prev-arm measured clockwise; atan2 sign flip gives (0, 360)
    ang = -ang
    if ang < 0:
        ang += 360.0
    return ang
