"""Synthetic floor plans with known ground truth.

All plans are drawn in millimeters on NCS-style layers (walls on
"A-WALL", labels on "A-ANNO") unless stated otherwise. Ground-truth maps
use wall centerlines as room outlines, which overlaps the generated
rooms far above the matching threshold.
"""

from __future__ import annotations

import random

from .areagraph import AreaGraph, Passage, RoomArea
from .ingest import Box, CadDocument, Line, Text, to_dxf_bytes
from .osm import GeoOrigin, OsmMap, serialize_area_graph
from .raster import GridTransform

MM = 1000.0
DOOR_WIDTH = 0.9  # m
TEXT_HEIGHT_MM = 250.0

Rect = tuple[float, float, float, float]  # x0, y0, x1, y1 in meters


def _doc_from_walls(walls: list[Line], texts: list[Text] | None = None,
                    wall_layer: str = "A-WALL",
                    text_layer: str = "A-ANNO") -> CadDocument:
    layers: dict[str, list] = {wall_layer: list(walls)}
    if texts:
        layers[text_layer] = list(texts)
    xs = [p for ln in walls for p in (ln.start[0], ln.end[0])]
    ys = [p for ln in walls for p in (ln.start[1], ln.end[1])]
    return CadDocument(layers=layers, drawing_unit_scale=0.001,
                       extents=Box(min(xs), min(ys), max(xs), max(ys)))


def _rect_walls(x0, y0, x1, y1) -> list[Line]:
    return [
        Line((x0 * MM, y0 * MM), (x1 * MM, y0 * MM)),
        Line((x1 * MM, y0 * MM), (x1 * MM, y1 * MM)),
        Line((x1 * MM, y1 * MM), (x0 * MM, y1 * MM)),
        Line((x0 * MM, y1 * MM), (x0 * MM, y0 * MM)),
    ]


def _wall_with_gap(p0, p1, gap_center, gap_width=DOOR_WIDTH) -> list[Line]:
    """Straight wall from p0 to p1 (meters) with a door gap on it."""
    (x0, y0), (x1, y1) = p0, p1
    if x0 == x1:  # vertical
        lo, hi = sorted((y0, y1))
        g0, g1 = gap_center - gap_width / 2, gap_center + gap_width / 2
        return [Line((x0 * MM, lo * MM), (x0 * MM, g0 * MM)),
                Line((x0 * MM, g1 * MM), (x0 * MM, hi * MM))]
    if y0 == y1:  # horizontal
        lo, hi = sorted((x0, x1))
        g0, g1 = gap_center - gap_width / 2, gap_center + gap_width / 2
        return [Line((lo * MM, y0 * MM), (g0 * MM, y0 * MM)),
                Line((g1 * MM, y0 * MM), (hi * MM, y0 * MM))]
    raise ValueError("fixture walls must be axis-aligned")


def _label(name: str, x: float, y: float) -> Text:
    return Text((x * MM, y * MM), name, TEXT_HEIGHT_MM)


def _gt_map(rooms: list[tuple[str, Rect]],
            doors: list[tuple[tuple[float, float], tuple[float, float], int, int]],
            origin: GeoOrigin, level: int = 0,
            resolution: float = 0.05) -> OsmMap:
    """Ground truth as an OSM map: centerline rectangles plus door chords."""
    graph_rooms = []
    for k, (name, (x0, y0, x1, y1)) in enumerate(rooms, start=1):
        polygon = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        room = RoomArea(id=k, polygon=polygon, area_m2=(x1 - x0) * (y1 - y0))
        room.tags["name"] = name
        graph_rooms.append(room)
    passages = [Passage(id=k + 1, endpoints=(a, b), room_a=ra, room_b=rb)
                for k, (a, b, ra, rb) in enumerate(doors)]
    graph = AreaGraph(rooms=graph_rooms, passages=passages,
                      transform=GridTransform(resolution, (0.0, 0.0)))
    return serialize_area_graph(graph, origin, level)


# --------------------------------------------------------------------------
# fixtures
# --------------------------------------------------------------------------

def two_rooms(wall_layer="A-WALL", text_layer="A-ANNO",
              names=("Office 101", "Lab 102")) -> CadDocument:
    """Two 4.2 m rooms separated by a wall with one 0.9 m door."""
    walls = _rect_walls(0, 0, 8.4, 4.2)
    walls += _wall_with_gap((4.2, 0), (4.2, 4.2), gap_center=2.1)
    texts = [_label(names[0], 2.1, 2.1), _label(names[1], 6.3, 2.1)]
    return _doc_from_walls(walls, texts, wall_layer, text_layer)


def two_rooms_dxf(**kwargs) -> bytes:
    return to_dxf_bytes(two_rooms(**kwargs))


def two_rooms_ground_truth(origin: GeoOrigin, level: int = 0) -> OsmMap:
    rooms = [("Office 101", (0.0, 0.0, 4.2, 4.2)),
             ("Lab 102", (4.2, 0.0, 8.4, 4.2))]
    doors = [((4.2, 2.1 - DOOR_WIDTH / 2), (4.2, 2.1 + DOOR_WIDTH / 2), 1, 2)]
    return _gt_map(rooms, doors, origin, level)


def italian_two_rooms() -> CadDocument:
    """Same plan, non-NCS layer names; defaults must fail on it."""
    return two_rooms(wall_layer="Muri", text_layer="Testi",
                     names=("Ufficio 1", "Laboratorio 2"))


def italian_two_rooms_dxf() -> bytes:
    return to_dxf_bytes(italian_two_rooms())


def three_room_path() -> CadDocument:
    """Three rooms in a row, doors 1-2 and 2-3."""
    walls = _rect_walls(0, 0, 12.6, 4.2)
    walls += _wall_with_gap((4.2, 0), (4.2, 4.2), gap_center=2.1)
    walls += _wall_with_gap((8.4, 0), (8.4, 4.2), gap_center=2.1)
    texts = [_label("Room 1", 2.1, 2.1), _label("Room 2", 6.3, 2.1),
             _label("Room 3", 10.5, 2.1)]
    return _doc_from_walls(walls, texts)


def three_room_path_dxf() -> bytes:
    return to_dxf_bytes(three_room_path())


def three_room_path_ground_truth(origin: GeoOrigin, level: int = 0) -> OsmMap:
    rooms = [("Room 1", (0.0, 0.0, 4.2, 4.2)),
             ("Room 2", (4.2, 0.0, 8.4, 4.2)),
             ("Room 3", (8.4, 0.0, 12.6, 4.2))]
    doors = [((4.2, 1.65), (4.2, 2.55), 1, 2),
             ((8.4, 1.65), (8.4, 2.55), 2, 3)]
    return _gt_map(rooms, doors, origin, level)


_GRID_NAMES = [["Room 11", "Room 12", "Room 13"],
               ["Room 21", "Corridor", "Room 23"],
               ["Room 31", "Room 32", "Room 33"]]
_CELL = 4.2


def grid_rooms() -> CadDocument:
    """3x3 grid of rooms around a central corridor cell.

    Doors: corridor to each edge-neighbor, and each edge cell to one
    corner cell, forming a connected tree of 9 areas and 8 passages.
    """
    s = _CELL
    walls = _rect_walls(0, 0, 3 * s, 3 * s)
    # vertical dividers x = s and x = 2s, horizontal y = s and y = 2s;
    # each drawn per-cell-row/column so door gaps land where needed
    doors_v = {(i, row): (row + 0.5) * s for i in (1, 2) for row in range(3)}
    doors_h = {(1, 1): 1.5 * s, (2, 1): 1.5 * s}   # y=s, y=2s: center column
    for i in (1, 2):  # vertical dividers
        for row in range(3):
            seg = ((i * s, row * s), (i * s, (row + 1) * s))
            if (i, row) in doors_v:
                walls += _wall_with_gap(*seg, gap_center=doors_v[(i, row)])
            else:
                walls.append(Line((seg[0][0] * MM, seg[0][1] * MM),
                                  (seg[1][0] * MM, seg[1][1] * MM)))
    for j in (1, 2):  # horizontal dividers
        for col in range(3):
            seg = ((col * s, j * s), ((col + 1) * s, j * s))
            if (j, col) in doors_h:
                walls += _wall_with_gap(*seg, gap_center=doors_h[(j, col)])
            else:
                walls.append(Line((seg[0][0] * MM, seg[0][1] * MM),
                                  (seg[1][0] * MM, seg[1][1] * MM)))
    texts = []
    for row in range(3):
        for col in range(3):
            texts.append(_label(_GRID_NAMES[row][col],
                                (col + 0.5) * s, (row + 0.5) * s))
    return _doc_from_walls(walls, texts)


def grid_rooms_dxf() -> bytes:
    return to_dxf_bytes(grid_rooms())


def grid_rooms_ground_truth(origin: GeoOrigin, level: int = 0) -> OsmMap:
    s = _CELL
    rooms = []
    ids = {}
    for row in range(3):
        for col in range(3):
            ids[(row, col)] = len(rooms) + 1
            rooms.append((_GRID_NAMES[row][col],
                          (col * s, row * s, (col + 1) * s, (row + 1) * s)))
    half = DOOR_WIDTH / 2
    doors = [
        # corridor (1,1) to its four edge neighbors
        ((s, 1.5 * s - half), (s, 1.5 * s + half), ids[(1, 0)], ids[(1, 1)]),
        ((2 * s, 1.5 * s - half), (2 * s, 1.5 * s + half), ids[(1, 1)], ids[(1, 2)]),
        ((1.5 * s - half, s), (1.5 * s + half, s), ids[(0, 1)], ids[(1, 1)]),
        ((1.5 * s - half, 2 * s), (1.5 * s + half, 2 * s), ids[(1, 1)], ids[(2, 1)]),
        # edge cells to corner cells
        ((s, 0.5 * s - half), (s, 0.5 * s + half), ids[(0, 0)], ids[(0, 1)]),
        ((2 * s, 0.5 * s - half), (2 * s, 0.5 * s + half), ids[(0, 1)], ids[(0, 2)]),
        ((s, 2.5 * s - half), (s, 2.5 * s + half), ids[(2, 0)], ids[(2, 1)]),
        ((2 * s, 2.5 * s - half), (2 * s, 2.5 * s + half), ids[(2, 1)], ids[(2, 2)]),
    ]
    return _gt_map(rooms, doors, origin, level)


def stair_floor(level: int) -> CadDocument:
    """One office, one stair core; the stair stacks across levels."""
    walls = _rect_walls(0, 0, 6.9, 4.2)
    walls += _wall_with_gap((4.2, 0), (4.2, 4.2), gap_center=2.1)
    texts = [_label(f"Office {level + 1}01", 2.1, 2.1),
             _label("STAIR-1", 5.55, 2.1)]
    return _doc_from_walls(walls, texts)


def stair_floor_dxf(level: int) -> bytes:
    return to_dxf_bytes(stair_floor(level))


def random_sealed_layout(seed: int) -> CadDocument:
    """Random BSP partition of a sealed rectangle into rooms with doors.

    Dividers are placed first; doors are punched afterwards, away from
    wall junctions, so no later wall can block an earlier door. Every
    divider carries one 0.9 m door and the free space stays connected.
    """
    rng = random.Random(seed)
    width = round(rng.uniform(10.0, 16.0), 1)
    height = round(rng.uniform(8.0, 14.0), 1)
    dividers: list[tuple[str, float, float, float]] = []  # axis, pos, lo, hi

    def split(x0, y0, x1, y1, depth):
        w, h = x1 - x0, y1 - y0
        if depth >= 3 or max(w, h) < 6.0 or rng.random() < 0.25:
            return
        if w >= h:
            cut = round(x0 + w * rng.uniform(0.35, 0.65), 1)
            dividers.append(("v", cut, y0, y1))
            split(x0, y0, cut, y1, depth + 1)
            split(cut, y0, x1, y1, depth + 1)
        else:
            cut = round(y0 + h * rng.uniform(0.35, 0.65), 1)
            dividers.append(("h", cut, x0, x1))
            split(x0, y0, x1, cut, depth + 1)
            split(x0, cut, x1, y1, depth + 1)

    split(0.0, 0.0, width, height, 0)
    walls = _rect_walls(0, 0, width, height)

    for axis, pos, lo, hi in dividers:
        junctions = {lo, hi}
        for other_axis, other_pos, other_lo, other_hi in dividers:
            if other_axis != axis and lo <= other_pos <= hi \
                    and other_lo <= pos <= other_hi:
                junctions.add(other_pos)
        blocks = sorted(junctions)
        gap_center = None
        for margin in (0.8, 0.5, 0.3):
            spans = [(a, b) for a, b in zip(blocks, blocks[1:])
                     if b - a >= DOOR_WIDTH + 2 * margin]
            if spans:
                a, b = spans[rng.randrange(len(spans))]
                gap_center = round(rng.uniform(a + margin + DOOR_WIDTH / 2,
                                               b - margin - DOOR_WIDTH / 2), 2)
                break
        if gap_center is None:
            gap_center = (blocks[0] + blocks[-1]) / 2  # last resort
        if axis == "v":
            walls += _wall_with_gap((pos, lo), (pos, hi), gap_center=gap_center)
        else:
            walls += _wall_with_gap((lo, pos), (hi, pos), gap_center=gap_center)
    return _doc_from_walls(walls)
