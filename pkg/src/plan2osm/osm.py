"""Geo-referencing, the hierarchical indoor tag schema, and OSM XML I/O.

Maps use standard OSM nodes/ways/tags only. Rooms are closed ways tagged
``indoor=room`` / ``osmAG:type=area``; passages are 2-node ways tagged
``osmAG:type=passage`` carrying ``osmAG:from``/``osmAG:to``. Coordinates
are serialized as 7-decimal fixed point and the writer is canonical, so
write -> read -> write is byte-stable.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

from .areagraph import AreaGraph
from .errors import (DanglingReference, MalformedXml, MixedIdSigns,
                     SerializationRefused, UnsupportedLatitude)

EARTH_RADIUS_M = 6378137.0
GENERATOR = "plan2osm 0.1.0"
COORD_DECIMALS = 7

AREA_TYPES = {"area", "passage", "structure"}
AREA_INDOOR = {"room", "corridor", "level"}

Point = tuple[float, float]


@dataclass(frozen=True)
class GeoOrigin:
    lat0: float
    lon0: float
    rotation: float = 0.0  # degrees, map-east vs true-east

    def __post_init__(self):
        if abs(self.lat0) >= 90.0:
            raise ValueError("origin latitude must satisfy |lat| < 90")


def _check_latitude(origin: GeoOrigin):
    if abs(origin.lat0) > 85.0:
        raise UnsupportedLatitude(
            f"local tangent projection unsupported at lat {origin.lat0}")


def cartesian_to_latlon(p: Point, origin: GeoOrigin) -> tuple[float, float]:
    """Local-tangent-plane (equirectangular) mapping, exact inverse of
    latlon_to_cartesian; adequate to sub-millimeter inside 1 km."""
    _check_latitude(origin)
    x, y = p
    th = math.radians(origin.rotation)
    cos_t, sin_t = math.cos(th), math.sin(th)
    north = y * cos_t - x * sin_t
    east = x * cos_t + y * sin_t
    lat = origin.lat0 + (north / EARTH_RADIUS_M) * 180.0 / math.pi
    lon = origin.lon0 + (east / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat0)))) \
        * 180.0 / math.pi
    return lat, lon


def latlon_to_cartesian(lat: float, lon: float, origin: GeoOrigin) -> Point:
    _check_latitude(origin)
    north = (lat - origin.lat0) * math.pi / 180.0 * EARTH_RADIUS_M
    east = (lon - origin.lon0) * math.pi / 180.0 * EARTH_RADIUS_M \
        * math.cos(math.radians(origin.lat0))
    th = math.radians(origin.rotation)
    cos_t, sin_t = math.cos(th), math.sin(th)
    x = east * cos_t - north * sin_t
    y = north * cos_t + east * sin_t
    return x, y


@dataclass
class OsmNode:
    id: int
    lat: float
    lon: float
    tags: dict[str, str] = field(default_factory=dict)


@dataclass
class OsmWay:
    id: int
    node_refs: list[int]
    tags: dict[str, str] = field(default_factory=dict)

    def tag(self, key, default=None):
        return self.tags.get(key, default)

    def is_closed(self):
        return len(self.node_refs) >= 2 and self.node_refs[0] == self.node_refs[-1]


@dataclass
class OsmMap:
    nodes: list[OsmNode] = field(default_factory=list)
    ways: list[OsmWay] = field(default_factory=list)
    origin: GeoOrigin | None = None
    bounds: tuple[float, float, float, float] | None = None  # minlat,minlon,maxlat,maxlon

    def node_index(self) -> dict[int, OsmNode]:
        return {n.id: n for n in self.nodes}

    def way_index(self) -> dict[int, OsmWay]:
        return {w.id: w for w in self.ways}

    def compute_bounds(self):
        if not self.nodes:
            return None
        lats = [n.lat for n in self.nodes]
        lons = [n.lon for n in self.nodes]
        return (round(min(lats), COORD_DECIMALS), round(min(lons), COORD_DECIMALS),
                round(max(lats), COORD_DECIMALS), round(max(lons), COORD_DECIMALS))

    def area_ways(self, indoor=("room", "corridor")) -> list[OsmWay]:
        return [w for w in self.ways
                if w.tag("osmAG:type") == "area" and w.tag("indoor") in indoor]

    def passage_ways(self) -> list[OsmWay]:
        return [w for w in self.ways if w.tag("osmAG:type") == "passage"]

    def way_polygon_latlon(self, way: OsmWay) -> list[tuple[float, float]]:
        idx = self.node_index()
        refs = way.node_refs[:-1] if way.is_closed() else way.node_refs
        return [(idx[r].lat, idx[r].lon) for r in refs]


class _IdAllocator:
    def __init__(self):
        self.counter = -1
        self.emitted: list[int] = []

    def next(self) -> int:
        value = self.counter
        self.counter -= 1
        self.emitted.append(value)
        return value


def _augment_ring(polygon: list[Point], endpoints: list[Point]) -> list[Point]:
    """Insert passage endpoints that lie mid-edge as proper ring vertices,
    so passage ways can share node ids with the room rings."""
    from .geometry import point_segment_distance
    ring = list(polygon)
    for pt in endpoints:
        if pt in ring:
            continue
        n = len(ring)
        best = None
        for i in range(n):
            d = point_segment_distance(pt, ring[i], ring[(i + 1) % n])
            if best is None or d < best[0]:
                best = (d, i)
        if best is not None and best[0] < 1e-6:
            ring.insert(best[1] + 1, pt)
    return ring


def serialize_area_graph(graph: AreaGraph, origin: GeoOrigin, level: int) -> OsmMap:
    """Emit the refined graph as an OSM map with deduplicated vertices.

    Ids descend from -1 in creation order; passage endpoints reuse the
    exact node ids already present in the room rings. Node coordinates
    keep full precision in memory; the writer quantizes.
    """
    _validate_graph_for_serialization(graph)
    ids = _IdAllocator()
    osm = OsmMap(origin=origin)
    node_by_key: dict[tuple[float, float], OsmNode] = {}

    def node_for(world: Point) -> OsmNode:
        lat, lon = cartesian_to_latlon(world, origin)
        key = (round(lat, COORD_DECIMALS), round(lon, COORD_DECIMALS))
        node = node_by_key.get(key)
        if node is None:
            node = OsmNode(ids.next(), lat, lon)
            node_by_key[key] = node
            osm.nodes.append(node)
        return node

    endpoints_by_room: dict[int, list[Point]] = {r.id: [] for r in graph.rooms}
    for passage in graph.passages:
        for rid in (passage.room_a, passage.room_b):
            endpoints_by_room[rid].extend(passage.endpoints)

    room_way_ids: dict[int, int] = {}
    room_labels: dict[int, str] = {}
    for room in graph.rooms:
        ring = _augment_ring(room.polygon, endpoints_by_room[room.id])
        refs = [node_for(v).id for v in ring]
        # collapse consecutive duplicates introduced by coordinate rounding
        deduped = [refs[0]]
        for r in refs[1:]:
            if r != deduped[-1]:
                deduped.append(r)
        if deduped[0] != deduped[-1]:
            deduped.append(deduped[0])
        way = OsmWay(ids.next(), deduped)
        way.tags = {
            "indoor": room.tags.get("indoor", "room"),
            "osmAG:type": "area",
            "osmAG:areaType": room.tags.get("osmAG:areaType", "room"),
            "level": str(level),
        }
        for key, value in room.tags.items():
            if key not in ("indoor", "osmAG:areaType"):
                way.tags[key] = value
        osm.ways.append(way)
        room_way_ids[room.id] = way.id
        room_labels[room.id] = way.tags.get("name", str(way.id))

    for passage in graph.passages:
        n1 = node_for(passage.endpoints[0])
        n2 = node_for(passage.endpoints[1])
        way = OsmWay(ids.next(), [n1.id, n2.id])
        way.tags = {
            "osmAG:type": "passage",
            "indoor": "door",
            "level": str(level),
            "osmAG:from": room_labels[passage.room_a],
            "osmAG:to": room_labels[passage.room_b],
        }
        osm.ways.append(way)

    osm.bounds = osm.compute_bounds()
    return osm


def _validate_graph_for_serialization(graph: AreaGraph):
    problems = []
    room_ids = {r.id for r in graph.rooms}
    if len(room_ids) != len(graph.rooms):
        problems.append("duplicate room ids")
    for room in graph.rooms:
        if len(room.polygon) < 3:
            problems.append(f"room {room.id} has fewer than 3 vertices")
        if room.area_m2 <= 0:
            problems.append(f"room {room.id} has non-positive area")
    tol = 2.0 * graph.transform.resolution
    from .geometry import point_polygon_boundary_distance
    by_id = {r.id: r for r in graph.rooms}
    for p in graph.passages:
        if p.room_a == p.room_b:
            problems.append(f"passage {p.id} links a room to itself")
            continue
        if p.room_a not in room_ids or p.room_b not in room_ids:
            problems.append(f"passage {p.id} references a missing room")
            continue
        for endpoint in p.endpoints:
            for rid in (p.room_a, p.room_b):
                d = point_polygon_boundary_distance(endpoint, by_id[rid].polygon)
                if d > tol:
                    problems.append(
                        f"passage {p.id} endpoint {d:.3f} m off room {rid} boundary")
    if problems:
        raise SerializationRefused("; ".join(problems))


# --------------------------------------------------------------------------
# XML writer / reader
# --------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.{COORD_DECIMALS}f}"


def write_osm_xml(osm: OsmMap) -> bytes:
    """Canonical OSM XML v0.6: fixed attribute order, 7-decimal fixed-point
    coordinates, nodes before ways, tags in stored order. Quantization
    happens here, so write -> read -> write is byte-stable."""
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    out.append(f'<osm version="0.6" generator={quoteattr(GENERATOR)}>')
    bounds = osm.bounds or osm.compute_bounds()
    if bounds is not None:
        out.append(f'  <bounds minlat="{_fmt(bounds[0])}" minlon="{_fmt(bounds[1])}"'
                   f' maxlat="{_fmt(bounds[2])}" maxlon="{_fmt(bounds[3])}"/>')
    for node in osm.nodes:
        head = f'  <node id="{node.id}" lat="{_fmt(node.lat)}" lon="{_fmt(node.lon)}"'
        if node.tags:
            out.append(head + ">")
            for k, v in node.tags.items():
                out.append(f'    <tag k={quoteattr(k)} v={quoteattr(v)}/>')
            out.append("  </node>")
        else:
            out.append(head + "/>")
    for way in osm.ways:
        out.append(f'  <way id="{way.id}">')
        for ref in way.node_refs:
            out.append(f'    <nd ref="{ref}"/>')
        for k, v in way.tags.items():
            out.append(f'    <tag k={quoteattr(k)} v={quoteattr(v)}/>')
        out.append("  </way>")
    out.append("</osm>")
    return ("\n".join(out) + "\n").encode("utf-8")


def read_osm_xml(data: bytes) -> OsmMap:
    """Parse OSM XML, checking referential integrity and id sign discipline."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc
    if root.tag != "osm":
        raise MalformedXml(f"root element is <{root.tag}>, expected <osm>")

    osm = OsmMap()
    for el in root:
        if el.tag == "bounds":
            try:
                osm.bounds = (float(el.get("minlat")), float(el.get("minlon")),
                              float(el.get("maxlat")), float(el.get("maxlon")))
            except (TypeError, ValueError) as exc:
                raise MalformedXml("bounds element missing coordinates") from exc
        elif el.tag == "node":
            try:
                node = OsmNode(int(el.get("id")), float(el.get("lat")),
                               float(el.get("lon")))
            except (TypeError, ValueError) as exc:
                raise MalformedXml("node missing id/lat/lon") from exc
            for tag in el.findall("tag"):
                node.tags[tag.get("k")] = tag.get("v")
            osm.nodes.append(node)
        elif el.tag == "way":
            try:
                way = OsmWay(int(el.get("id")), [])
            except (TypeError, ValueError) as exc:
                raise MalformedXml("way missing id") from exc
            for child in el:
                if child.tag == "nd":
                    try:
                        way.node_refs.append(int(child.get("ref")))
                    except (TypeError, ValueError) as exc:
                        raise MalformedXml("nd missing ref") from exc
                elif child.tag == "tag":
                    way.tags[child.get("k")] = child.get("v")
            osm.ways.append(way)

    ids = [n.id for n in osm.nodes] + [w.id for w in osm.ways]
    if any(i > 0 for i in ids) and any(i < 0 for i in ids):
        raise MixedIdSigns("document mixes positive and negative ids")
    known = {n.id for n in osm.nodes}
    for way in osm.ways:
        for ref in way.node_refs:
            if ref not in known:
                raise DanglingReference(f"way {way.id} references missing node {ref}")
    return osm


# --------------------------------------------------------------------------
# schema validation
# --------------------------------------------------------------------------

def validate_osmag(osm: OsmMap) -> list[str]:
    """Closed-world tag schema checks; returns human-readable violations."""
    violations: list[str] = []
    ids = [n.id for n in osm.nodes] + [w.id for w in osm.ways]
    if len(set(ids)) != len(ids):
        violations.append("element ids are not unique")
    if any(i >= 0 for i in ids):
        violations.append("non-negative element id present")

    known = {n.id for n in osm.nodes}
    for way in osm.ways:
        missing = [r for r in way.node_refs if r not in known]
        if missing:
            violations.append(f"way {way.id} has dangling refs {missing}")
        kind = way.tag("osmAG:type")
        if kind not in AREA_TYPES:
            violations.append(f"way {way.id} osmAG:type={kind!r} not in {sorted(AREA_TYPES)}")
            continue
        if kind == "area":
            indoor = way.tag("indoor")
            if indoor not in AREA_INDOOR:
                violations.append(
                    f"way {way.id} indoor={indoor!r} not in {sorted(AREA_INDOOR)}")
            if not way.is_closed() or len(way.node_refs) < 4:
                violations.append(f"area way {way.id} is not a closed ring (>=4 refs)")
        elif kind == "structure":
            if not way.is_closed() or len(way.node_refs) < 4:
                violations.append(f"structure way {way.id} is not a closed ring")
        elif kind == "passage":
            if len(way.node_refs) != 2:
                violations.append(f"passage way {way.id} must have exactly 2 refs")

    if osm.bounds is not None and osm.nodes:
        minlat, minlon, maxlat, maxlon = osm.bounds
        eps = 10 ** -COORD_DECIMALS
        for node in osm.nodes:
            if not (minlat - eps <= node.lat <= maxlat + eps
                    and minlon - eps <= node.lon <= maxlon + eps):
                violations.append(f"node {node.id} outside bounds")
                break

    # no two nodes within 1e-7 degrees of each other on the same level
    # (stacked floors legitimately share plan coordinates)
    node_levels: dict[int, set[str]] = {}
    for way in osm.ways:
        raw = way.tag("level") or ""
        parts = raw.split(";")
        if len(parts) == 2 and len(way.node_refs) == 2:
            # a vertical passage: one endpoint per level
            node_levels.setdefault(way.node_refs[0], set()).add(parts[0])
            node_levels.setdefault(way.node_refs[1], set()).add(parts[1])
            continue
        for ref in way.node_refs:
            node_levels.setdefault(ref, set()).update(parts)
    index = osm.node_index()
    cell: dict[tuple[int, int], list[int]] = {}
    scale = 10 ** COORD_DECIMALS
    for node in osm.nodes:
        key = (int(round(node.lat * scale)), int(round(node.lon * scale)))
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                for other in cell.get((key[0] + dy, key[1] + dx), ()):
                    onode = index[other]
                    shared = node_levels.get(node.id, set()) \
                        & node_levels.get(other, set())
                    if not shared:
                        continue
                    if (abs(onode.lat - node.lat) < 1 / scale
                            and abs(onode.lon - node.lon) < 1 / scale):
                        violations.append(
                            f"nodes {other} and {node.id} closer than 1e-7 degrees")
        cell.setdefault(key, []).append(node.id)
    return violations
