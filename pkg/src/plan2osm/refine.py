"""Geometric and logical cleanup of a raw area graph.

Order of operations mirrors the segmentation contract: duplicate rooms
are consolidated, slivers are merged into larger neighbors, passage
endpoints are collected as preserved points, then every room polygon is
simplified (Douglas-Peucker between preserved vertices, with a tighter
tolerance on curvy stretches) and de-spiked.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from shapely.geometry import LineString, Polygon as ShapelyPolygon
from shapely.ops import unary_union

from .areagraph import AreaGraph, Passage, RoomArea
from .geometry import interior_angle_deg, point_segment_distance, signed_area

log = logging.getLogger(__name__)

Point = tuple[float, float]

# boundary stretches turning faster than this (mean |turn| per vertex over
# a 5-vertex window) count as curvilinear and get tolerance/4
CURVY_TURN_DEG_PER_VERTEX = 15.0
CURVY_WINDOW = 5


@dataclass(frozen=True)
class RefineParams:
    epsilon_simplify: float = 0.10  # m
    theta_spike: float = 15.0       # degrees
    a_min: float = 1.0              # m^2
    d_max_merge: float = 0.3        # m

    def __post_init__(self):
        if self.epsilon_simplify <= 0:
            raise ValueError("epsilon_simplify must be positive")
        if not 0 < self.theta_spike < 90:
            raise ValueError("theta_spike must be in (0, 90) degrees")
        if self.a_min < 0 or self.d_max_merge < 0:
            raise ValueError("a_min and d_max_merge must be >= 0")


@dataclass
class PreservedPoints:
    points: set[Point] = field(default_factory=set)

    def __contains__(self, p: Point) -> bool:
        return p in self.points

    def __iter__(self):
        return iter(sorted(self.points))

    def __len__(self):
        return len(self.points)


def collect_passage_endpoints(passages: list[Passage]) -> PreservedPoints:
    pts: set[Point] = set()
    for p in passages:
        pts.add(p.endpoints[0])
        pts.add(p.endpoints[1])
    return PreservedPoints(pts)


# --------------------------------------------------------------------------
# duplicate removal and small-room merging
# --------------------------------------------------------------------------

def _shape(room: RoomArea) -> ShapelyPolygon:
    return ShapelyPolygon(room.polygon)


def remove_duplicate_polygons(graph: AreaGraph) -> AreaGraph:
    """Drop rooms geometrically identical to an earlier one (symmetric
    difference under 1% of the smaller area); re-point their passages."""
    kept: list[RoomArea] = []
    alias: dict[int, int] = {}
    shapes: list[ShapelyPolygon] = []
    for room in graph.rooms:
        shape = _shape(room)
        duplicate_of = None
        for other, other_shape in zip(kept, shapes):
            smaller = min(shape.area, other_shape.area)
            if smaller <= 0:
                continue
            if shape.symmetric_difference(other_shape).area < 0.01 * smaller:
                duplicate_of = other.id
                break
        if duplicate_of is None:
            kept.append(room)
            shapes.append(shape)
        else:
            alias[room.id] = duplicate_of
    if alias:
        passages = []
        for p in graph.passages:
            a = alias.get(p.room_a, p.room_a)
            b = alias.get(p.room_b, p.room_b)
            if a == b:
                continue
            passages.append(Passage(p.id, p.endpoints, a, b))
        graph.passages = passages
    graph.rooms = kept
    return graph


def _union_polygons(a: ShapelyPolygon, b: ShapelyPolygon, d_max: float):
    u = unary_union([a, b])
    if u.geom_type != "Polygon" and d_max > 0:
        # disjoint within tolerance: bridge the gap with a thin connector
        pa, pb = _nearest_points(a, b)
        connector = LineString([pa, pb]).buffer(max(d_max / 2, 0.01))
        u = unary_union([a, b, connector])
    if u.geom_type != "Polygon":
        return None
    ring = list(u.exterior.coords[:-1])
    if signed_area(ring) < 0:
        ring.reverse()
    return ring


def _nearest_points(a, b):
    from shapely.ops import nearest_points
    pa, pb = nearest_points(a, b)
    return (pa.x, pa.y), (pb.x, pb.y)


def merge_small_rooms(graph: AreaGraph, a_min: float, d_max_merge: float) -> AreaGraph:
    """Union every under-sized room into its largest qualifying neighbor,
    repeating to fixpoint. Neighbors are rooms connected by a passage or
    within d_max_merge of the boundary."""
    while True:
        merged = _merge_one_small_room(graph, a_min, d_max_merge)
        if not merged:
            return graph


def _merge_one_small_room(graph: AreaGraph, a_min: float, d_max: float) -> bool:
    rooms = {r.id: r for r in graph.rooms}
    shapes = {r.id: _shape(r) for r in graph.rooms}
    passage_neighbors: dict[int, set[int]] = {r.id: set() for r in graph.rooms}
    for p in graph.passages:
        passage_neighbors[p.room_a].add(p.room_b)
        passage_neighbors[p.room_b].add(p.room_a)

    # smallest room first so chains of slivers collapse inward
    for room in sorted(graph.rooms, key=lambda r: (r.area_m2, r.id)):
        if room.area_m2 >= a_min:
            continue
        candidates = set(passage_neighbors[room.id])
        for other in graph.rooms:
            if other.id == room.id or other.id in candidates:
                continue
            if shapes[room.id].distance(shapes[other.id]) <= d_max:
                candidates.add(other.id)
        qualifying = [rooms[c] for c in candidates if rooms[c].area_m2 > room.area_m2]
        if not qualifying:
            continue
        absorber = max(qualifying, key=lambda r: (r.area_m2, -r.id))
        ring = _union_polygons(shapes[absorber.id], shapes[room.id], d_max)
        if ring is None:
            log.warning("cannot union room %d into %d; skipped", room.id, absorber.id)
            continue
        absorber.polygon = ring
        absorber.area_m2 = signed_area(ring)
        for key, value in room.tags.items():
            absorber.tags.setdefault(key, value)
        graph.rooms = [r for r in graph.rooms if r.id != room.id]
        passages = []
        for p in graph.passages:
            a = absorber.id if p.room_a == room.id else p.room_a
            b = absorber.id if p.room_b == room.id else p.room_b
            if a == b:
                continue  # the connecting passage disappears with the merge
            passages.append(Passage(p.id, p.endpoints, a, b))
        graph.passages = passages
        return True
    return False


# --------------------------------------------------------------------------
# polygon simplification
# --------------------------------------------------------------------------

def _turning_angles(poly: list[Point]) -> list[float]:
    n = len(poly)
    out = []
    for i in range(n):
        a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
        v1 = (b[0] - a[0], b[1] - a[1])
        v2 = (c[0] - b[0], c[1] - b[1])
        cross = v1[0] * v2[1] - v1[1] * v2[0]
        dot = v1[0] * v2[0] + v1[1] * v2[1]
        out.append(abs(math.degrees(math.atan2(cross, dot))))
    return out


def _curvy_flags(poly: list[Point]) -> list[bool]:
    turns = _turning_angles(poly)
    n = len(poly)
    half = CURVY_WINDOW // 2
    flags = []
    for i in range(n):
        window = [turns[(i + k) % n] for k in range(-half, half + 1)]
        flags.append(sum(window) / len(window) > CURVY_TURN_DEG_PER_VERTEX)
    return flags


def _dp_keep(points: list[Point], curvy: list[bool], eps: float) -> list[int]:
    """Douglas-Peucker on an open chain; returns kept indices including both
    ends. Any curvy vertex strictly inside a span tightens its tolerance."""
    keep = [0, len(points) - 1]
    stack = [(0, len(points) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        tol = eps / 4 if any(curvy[k] for k in range(i + 1, j)) else eps
        best_d = -1.0
        best_k = -1
        for k in range(i + 1, j):
            d = point_segment_distance(points[k], points[i], points[j])
            if d > best_d + 1e-15:
                best_d = d
                best_k = k
        if best_d > tol:
            keep.append(best_k)
            stack.append((i, best_k))
            stack.append((best_k, j))
    return sorted(set(keep))


def _locate_preserved(poly: list[Point], preserve) -> tuple[list[Point], list[int]]:
    """Return the polygon with any missing on-boundary preserve points
    inserted as vertices, plus the preserved vertex indices."""
    working = list(poly)
    for pt in preserve:
        if pt in working:
            continue
        n = len(working)
        best = None
        for i in range(n):
            d = point_segment_distance(pt, working[i], working[(i + 1) % n])
            if best is None or d < best[0]:
                best = (d, i)
        if best is not None and best[0] < 1e-6:
            working.insert(best[1] + 1, pt)
    idx = [i for i, v in enumerate(working) if v in preserve]
    return working, idx


def simplify_polygon(polygon: list[Point], epsilon_simplify: float,
                     preserve: PreservedPoints) -> list[Point]:
    """Douglas-Peucker between consecutive preserved vertices.

    Preserved vertices are forced split points and survive bitwise.
    Stretches classified as curvilinear are simplified at a quarter of
    the tolerance so genuine curves keep their shape.
    """
    if len(polygon) <= 3:
        return list(polygon)
    pset = set(preserve.points) if isinstance(preserve, PreservedPoints) else set(preserve)
    working, pres_idx = _locate_preserved(polygon, pset)
    n = len(working)
    curvy = _curvy_flags(working)

    if len(pres_idx) < 2:
        # anchor on extreme vertices so the closed ring splits deterministically
        a0 = min(range(n), key=lambda i: working[i])
        a1 = max(range(n), key=lambda i: math.dist(working[a0], working[i]))
        anchors = sorted({a0, a1} | set(pres_idx))
    else:
        anchors = pres_idx

    kept: list[int] = []
    m = len(anchors)
    for t in range(m):
        i = anchors[t]
        j = anchors[(t + 1) % m]
        span = list(range(i, j + 1)) if i < j else list(range(i, n)) + list(range(0, j + 1))
        pts = [working[k] for k in span]
        flags = [curvy[k] for k in span]
        for local in _dp_keep(pts, flags, epsilon_simplify)[:-1]:
            kept.append(span[local])
    kept = sorted(set(kept))

    if len(kept) < 3:
        log.warning("simplification collapsed a polygon; keeping 3 vertices")
        extra = max(range(n), key=lambda k: min(math.dist(working[k], working[i])
                                                for i in kept))
        kept = sorted(set(kept) | {extra})[:3]
        while len(kept) < 3:
            kept.append((kept[-1] + 1) % n)
        kept = sorted(set(kept))
    return [working[k] for k in kept]


def remove_spikes(polygon: list[Point], theta_spike: float,
                  preserve: PreservedPoints) -> list[Point]:
    """Iteratively drop non-preserved vertices with interior angle below
    theta_spike, sharpest first, until none remain."""
    pset = set(preserve.points) if isinstance(preserve, PreservedPoints) else set(preserve)
    poly = list(polygon)
    while len(poly) > 3:
        best = None
        for i, v in enumerate(poly):
            if v in pset:
                continue
            ang = interior_angle_deg(poly[i - 1], v, poly[(i + 1) % len(poly)])
            if ang < theta_spike and (best is None or ang < best[0]):
                best = (ang, i)
        if best is None:
            return poly
        del poly[best[1]]
    if any(interior_angle_deg(poly[i - 1], poly[i], poly[(i + 1) % 3]) < theta_spike
           for i in range(3) if poly[i] not in pset):
        log.warning("spike removal stopped at 3 vertices")
    return poly


def merge_rooms_interactive(graph: AreaGraph, room_ids: list[int]) -> AreaGraph:
    """Operator-driven merge of over-segmented rooms into one.

    The selected rooms must be mutually reachable through passages or
    touching boundaries; the largest one absorbs the rest so the result
    keeps valid passages and disjoint polygons.
    """
    if len(set(room_ids)) < 2:
        raise ValueError("select at least two distinct rooms")
    rooms = {r.id: r for r in graph.rooms}
    missing = [rid for rid in room_ids if rid not in rooms]
    if missing:
        raise KeyError(f"unknown room ids {missing}")

    selected = set(room_ids)
    adjacency: dict[int, set[int]] = {rid: set() for rid in selected}
    for p in graph.passages:
        if p.room_a in selected and p.room_b in selected:
            adjacency[p.room_a].add(p.room_b)
            adjacency[p.room_b].add(p.room_a)
    shapes = {rid: _shape(rooms[rid]) for rid in selected}
    ids = sorted(selected)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if shapes[a].touches(shapes[b]) or shapes[a].intersects(shapes[b]):
                adjacency[a].add(b)
                adjacency[b].add(a)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        for nbr in adjacency[stack.pop()]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    if seen != selected:
        raise ValueError("selected rooms are not adjacent; nothing merged")

    absorber = max((rooms[rid] for rid in selected), key=lambda r: (r.area_m2, -r.id))
    ring = None
    union = shapes[absorber.id]
    for rid in ids:
        if rid != absorber.id:
            union = union.union(shapes[rid])
    if union.geom_type != "Polygon":
        raise ValueError("merged rooms do not form one simple polygon")
    ring = list(union.exterior.coords[:-1])
    if signed_area(ring) < 0:
        ring.reverse()
    absorber.polygon = ring
    absorber.area_m2 = signed_area(ring)
    for rid in ids:
        if rid == absorber.id:
            continue
        for key, value in rooms[rid].tags.items():
            absorber.tags.setdefault(key, value)
    graph.rooms = [r for r in graph.rooms if r.id == absorber.id or r.id not in selected]
    passages = []
    for p in graph.passages:
        a = absorber.id if p.room_a in selected else p.room_a
        b = absorber.id if p.room_b in selected else p.room_b
        if a == b:
            continue
        passages.append(Passage(p.id, p.endpoints, a, b))
    graph.passages = passages
    return graph


def refine_graph(graph: AreaGraph, params: RefineParams) -> tuple[AreaGraph, PreservedPoints]:
    """Full refinement pass; returns the graph and the preserved points."""
    graph = remove_duplicate_polygons(graph)
    graph = merge_small_rooms(graph, params.a_min, params.d_max_merge)
    preserved = collect_passage_endpoints(graph.passages)
    for room in graph.rooms:
        room.polygon = simplify_polygon(room.polygon, params.epsilon_simplify, preserved)
        room.polygon = remove_spikes(room.polygon, params.theta_spike, preserved)
        room.area_m2 = signed_area(room.polygon)
    return graph, preserved
