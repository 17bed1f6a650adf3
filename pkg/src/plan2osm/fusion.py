"""Merging per-floor maps into one multi-level building map.

The fused map keeps every floor's elements (ids renumbered, level tags
set), adds one building outline (structure way), one floor area per
level, osmAG:parent links forming a building -> floor -> room forest,
and vertical passages between stair/elevator rooms that stack across
adjacent levels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from shapely.geometry import Polygon as ShapelyPolygon
from shapely.ops import unary_union

from .errors import ConfigError, DuplicateLevel, OriginMismatch
from .geometry import signed_area
from .osm import (GeoOrigin, OsmMap, OsmNode, OsmWay, cartesian_to_latlon,
                  latlon_to_cartesian)

log = logging.getLogger(__name__)

DEFAULT_STAIR_KEYWORDS = ("STAIR", "ELEV", "LIFT")
_ELEVATOR_KEYWORDS = ("ELEV", "LIFT")

VERTICAL_IOU_THRESHOLD = 0.3
VERTICAL_CENTROID_DISTANCE_M = 2.0


@dataclass
class FloorSpec:
    map: OsmMap
    level: int
    elevation_m: float = 0.0
    stair_keywords: tuple[str, ...] = DEFAULT_STAIR_KEYWORDS


def _working_origin(floors: list[FloorSpec]) -> GeoOrigin:
    for f in floors:
        if f.map.origin is not None:
            return f.map.origin
    bounds = floors[0].map.bounds or floors[0].map.compute_bounds()
    if bounds is None:
        raise ConfigError("cannot derive an origin from an empty map")
    return GeoOrigin((bounds[0] + bounds[2]) / 2, (bounds[1] + bounds[3]) / 2)


def _way_polygon_m(osm: OsmMap, way: OsmWay, origin: GeoOrigin):
    pts = [latlon_to_cartesian(lat, lon, origin)
           for lat, lon in osm.way_polygon_latlon(way)]
    return ShapelyPolygon(pts) if len(pts) >= 3 else None


def _is_stairlike(way: OsmWay, keywords: tuple[str, ...]) -> bool:
    if way.tag("osmAG:areaType") == "stairs":
        return True
    probe = " ".join(filter(None, (way.tag("name"), way.tag("osmAG:textLayer"))))
    upper = probe.upper()
    return any(kw.upper() in upper for kw in keywords)


def _is_elevator(way: OsmWay) -> bool:
    probe = (way.tag("name") or "").upper()
    return any(kw in probe for kw in _ELEVATOR_KEYWORDS)


@dataclass
class _VerticalLink:
    way_low: OsmWay
    way_high: OsmWay
    centroid_low: tuple[float, float]   # meters
    centroid_high: tuple[float, float]
    kind: str                           # "stairs" | "elevator"


def detect_vertical_links(osm: OsmMap, floor_low: FloorSpec, floor_high: FloorSpec,
                          low_ways: list[OsmWay], high_ways: list[OsmWay],
                          origin: GeoOrigin) -> list[_VerticalLink]:
    """Pair stair/elevator rooms across two adjacent levels by overlap.

    A pair matches when polygon IoU >= 0.3 or centroids are within 2 m;
    greedy one-to-one, best overlap first.
    """
    if abs(floor_low.level - floor_high.level) != 1:
        raise ConfigError("vertical links only join adjacent levels")
    lows = [w for w in low_ways if _is_stairlike(w, floor_low.stair_keywords)]
    highs = [w for w in high_ways if _is_stairlike(w, floor_high.stair_keywords)]

    scored = []
    for wl in lows:
        pl = _way_polygon_m(osm, wl, origin)
        if pl is None or pl.area <= 0:
            continue
        for wh in highs:
            ph = _way_polygon_m(osm, wh, origin)
            if ph is None or ph.area <= 0:
                continue
            inter = pl.intersection(ph).area
            union = pl.union(ph).area
            iou = inter / union if union > 0 else 0.0
            dist = math.dist((pl.centroid.x, pl.centroid.y),
                             (ph.centroid.x, ph.centroid.y))
            if iou >= VERTICAL_IOU_THRESHOLD or dist <= VERTICAL_CENTROID_DISTANCE_M:
                scored.append((-iou, dist, wl.id, wh.id, wl, wh, pl, ph))
    scored.sort(key=lambda t: t[:4])

    links = []
    used_low: set[int] = set()
    used_high: set[int] = set()
    for _, _, _, _, wl, wh, pl, ph in scored:
        if wl.id in used_low or wh.id in used_high:
            continue
        used_low.add(wl.id)
        used_high.add(wh.id)
        kind = "elevator" if (_is_elevator(wl) or _is_elevator(wh)) else "stairs"
        links.append(_VerticalLink(wl, wh, (pl.centroid.x, pl.centroid.y),
                                   (ph.centroid.x, ph.centroid.y), kind))
    return links


def fuse_floors(floors: list[FloorSpec]) -> OsmMap:
    """Fuse per-floor maps into one hierarchical multi-level map."""
    if len(floors) < 2:
        raise ConfigError("fusion needs at least 2 floors")
    levels = [f.level for f in floors]
    if len(set(levels)) != len(levels):
        raise DuplicateLevel(f"duplicate level indices in {sorted(levels)}")
    explicit = [f.map.origin for f in floors if f.map.origin is not None]
    for a, b in zip(explicit, explicit[1:]):
        if (abs(a.lat0 - b.lat0) > 1e-9 or abs(a.lon0 - b.lon0) > 1e-9
                or abs(a.rotation - b.rotation) > 1e-9):
            raise OriginMismatch(f"floor origins differ: {a} vs {b}")

    origin = _working_origin(floors)
    floors = sorted(floors, key=lambda f: f.level)

    fused = OsmMap(origin=origin)
    counter = [-1]
    # nodes are shared within one level but never across levels: stacked
    # floors coincide in plan yet are different physical points
    node_registry: dict[tuple[str, float, float], int] = {}

    def next_id():
        value = counter[0]
        counter[0] -= 1
        return value

    def add_node(lat, lon, level_key="", tags=None):
        lat, lon = round(lat, 7), round(lon, 7)
        key = (level_key, lat, lon)
        existing = node_registry.get(key)
        if existing is not None and not tags:
            return existing
        node = OsmNode(next_id(), lat, lon, tags or {})
        fused.nodes.append(node)
        node_registry.setdefault(key, node)
        return node

    # copy all floors with fresh ids and level tags
    per_level_ways: dict[int, list[OsmWay]] = {}
    for floor in floors:
        node_map: dict[int, int] = {}
        for node in floor.map.nodes:
            copied = add_node(node.lat, node.lon, str(floor.level), dict(node.tags))
            node_map[node.id] = copied.id
        level_ways = []
        way_map: dict[int, int] = {}
        for way in floor.map.ways:
            copied = OsmWay(next_id(), [node_map[r] for r in way.node_refs],
                            dict(way.tags))
            copied.tags["level"] = str(floor.level)
            way_map[way.id] = copied.id
            fused.ways.append(copied)
            level_ways.append(copied)
        # passage endpoints referenced by old way id must follow the renumbering
        for way in level_ways:
            for key in ("osmAG:from", "osmAG:to"):
                value = way.tag(key)
                if value is None:
                    continue
                try:
                    old = int(value)
                except ValueError:
                    continue  # a name label survives renumbering unchanged
                if old in way_map:
                    way.tags[key] = str(way_map[old])
        per_level_ways[floor.level] = level_ways

    # footprints per level and the building hull
    footprints: dict[int, ShapelyPolygon] = {}
    for floor in floors:
        rooms = [w for w in per_level_ways[floor.level]
                 if w.tag("osmAG:type") == "area" and w.tag("indoor") in ("room", "corridor")]
        polys = [p for p in (_way_polygon_m(fused, w, origin) for w in rooms)
                 if p is not None and p.area > 0]
        if not polys:
            raise ConfigError(f"floor {floor.level} has no room polygons")
        union = unary_union(polys)
        footprints[floor.level] = union

    hull = unary_union(list(footprints.values())).convex_hull

    def way_from_ring(ring_m, tags, level_key=""):
        coords = list(ring_m)
        if signed_area(coords) < 0:
            coords.reverse()
        refs = []
        for x, y in coords:
            lat, lon = cartesian_to_latlon((x, y), origin)
            refs.append(add_node(lat, lon, level_key).id)
        refs.append(refs[0])
        way = OsmWay(next_id(), refs, tags)
        fused.ways.append(way)
        return way

    building = way_from_ring(hull.exterior.coords[:-1],
                             {"osmAG:type": "structure", "building": "yes"})

    # one floor area per level, parented to the building
    floor_way_by_level: dict[int, OsmWay] = {}
    for floor in floors:
        outline = footprints[floor.level]
        if outline.geom_type != "Polygon":
            outline = outline.convex_hull  # disjoint wings: take the envelope
        floor_way = way_from_ring(
            outline.exterior.coords[:-1],
            {"indoor": "level", "osmAG:type": "area", "osmAG:areaType": "floor",
             "level": str(floor.level), "osmAG:parent": str(building.id),
             "ele": repr(floor.elevation_m)},
            level_key=str(floor.level))
        floor_way_by_level[floor.level] = floor_way

    # parent every room and passage to its floor area
    for floor in floors:
        parent = str(floor_way_by_level[floor.level].id)
        for way in per_level_ways[floor.level]:
            if way.tag("osmAG:type") in ("area", "passage"):
                way.tags["osmAG:parent"] = parent

    # vertical passages between adjacent levels
    for low, high in zip(floors, floors[1:]):
        if high.level - low.level != 1:
            log.warning("levels %d and %d are not adjacent; no vertical links",
                        low.level, high.level)
            continue
        links = detect_vertical_links(fused, low, high,
                                      per_level_ways[low.level],
                                      per_level_ways[high.level], origin)
        if not links:
            log.warning("no vertical passage found between levels %d and %d",
                        low.level, high.level)
        for link in links:
            lat1, lon1 = cartesian_to_latlon(link.centroid_low, origin)
            lat2, lon2 = cartesian_to_latlon(link.centroid_high, origin)
            n1 = add_node(lat1, lon1, str(low.level))
            n2 = add_node(lat2, lon2, str(high.level))
            way = OsmWay(next_id(), [n1.id, n2.id], {
                "osmAG:type": "passage",
                "indoor": link.kind,
                "level": f"{low.level};{high.level}",
                "osmAG:from": link.way_low.tag("name", str(link.way_low.id)),
                "osmAG:to": link.way_high.tag("name", str(link.way_high.id)),
                "osmAG:parent": str(floor_way_by_level[low.level].id),
            })
            fused.ways.append(way)

    fused.bounds = fused.compute_bounds()
    return fused


def validate_hierarchy(osm: OsmMap) -> list[str]:
    """Check the parent-link forest: single structure root, acyclic links,
    resolvable parents, and a parent on every room."""
    violations: list[str] = []
    ways = osm.way_index()
    parents: dict[int, int] = {}
    for way in osm.ways:
        raw = way.tag("osmAG:parent")
        if raw is None:
            continue
        try:
            parents[way.id] = int(raw)
        except ValueError:
            violations.append(f"way {way.id} has non-numeric osmAG:parent {raw!r}")
    for child, parent in parents.items():
        if parent not in ways:
            violations.append(f"way {child} references missing parent {parent}")

    roots = [w for w in osm.ways
             if w.tag("osmAG:type") == "structure" and w.id not in parents]
    if len(roots) != 1:
        violations.append(f"expected exactly 1 structure root, found {len(roots)}")

    for start in parents:
        seen = {start}
        current = start
        while current in parents:
            current = parents[current]
            if current in seen:
                violations.append(f"parent cycle through way {start}")
                break
            seen.add(current)

    for way in osm.area_ways(("room", "corridor")):
        if way.id not in parents:
            violations.append(f"room way {way.id} has no osmAG:parent")
    return violations


def room_graph_connected(osm: OsmMap) -> bool:
    """True when rooms plus (vertical) passages form one connected graph.

    Name labels are resolved within the level a passage names, so equal
    room names on different floors stay distinct.
    """
    rooms = osm.area_ways(("room", "corridor"))
    if not rooms:
        return True

    def labels_for(level: str | None) -> dict[str, int]:
        table: dict[str, int] = {}
        for way in rooms:
            if level is not None and way.tag("level") != level:
                continue
            table[str(way.id)] = way.id
            name = way.tag("name")
            if name is not None:
                table.setdefault(name, way.id)
        return table

    adjacency: dict[int, set[int]] = {w.id: set() for w in rooms}
    for way in osm.passage_ways():
        level = way.tag("level")
        if level is not None and ";" in level:
            lo, hi = level.split(";", 1)
            a = labels_for(lo).get(way.tag("osmAG:from", ""))
            b = labels_for(hi).get(way.tag("osmAG:to", ""))
        else:
            table = labels_for(level)
            a = table.get(way.tag("osmAG:from", ""))
            b = table.get(way.tag("osmAG:to", ""))
        if a is not None and b is not None and a != b:
            adjacency[a].add(b)
            adjacency[b].add(a)

    start = rooms[0].id
    seen = {start}
    stack = [start]
    while stack:
        for nbr in adjacency[stack.pop()]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == len(rooms)
