"""Score-based association of CAD text annotations with room polygons.

Scoring runs in the raster pixel frame: the nearby-matching threshold
and the size-factor constant are pixel-denominated. Inside matches favor
centrally placed labels; nearby matches favor small rooms and short
distances. The highest strictly positive score wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from shapely.geometry import Point as ShapelyPoint, Polygon as ShapelyPolygon

from .areagraph import AreaGraph
from .errors import WrongCase
from .ingest import TextAnnotation

Point = tuple[float, float]


@dataclass(frozen=True)
class ScoreParams:
    rho_max: float = 0.7   # max relative center distance for the flat branch
    d_max: float = 50.0    # nearby matching distance threshold, pixels

    def __post_init__(self):
        if self.rho_max <= 0 or self.d_max <= 0:
            raise ValueError("score parameters must be positive")


@dataclass
class ScoringContext:
    """Geometric quantities of one text/polygon pair, pixel frame."""

    p: Point                 # text position
    polygon: list[Point]     # candidate room polygon
    centroid: Point
    area: float              # px^2
    char_radius: float       # sqrt(area/pi), px
    d_center: float          # |p - centroid|, px
    d_boundary: float        # dist(p, polygon boundary), px
    rho: float               # d_center / char_radius
    inside: bool

    @classmethod
    def build(cls, p: Point, polygon: list[Point]) -> "ScoringContext":
        shape = ShapelyPolygon(polygon)
        area = shape.area
        if area <= 0:
            raise ValueError("candidate polygon has no area")
        c = shape.centroid
        pt = ShapelyPoint(p)
        d_center = math.dist(p, (c.x, c.y))
        d_boundary = shape.exterior.distance(pt)
        s = math.sqrt(area / math.pi)
        return cls(p=p, polygon=list(polygon), centroid=(c.x, c.y), area=area,
                   char_radius=s, d_center=d_center, d_boundary=d_boundary,
                   rho=d_center / s, inside=bool(shape.covers(pt)))


@dataclass
class Assignment:
    text: TextAnnotation
    room_id: int
    score: float
    case: str  # "inside" | "nearby"


def score_inside(ctx: ScoringContext, params: ScoreParams = ScoreParams()) -> float:
    """Centrality score for a label inside the polygon (boundary counts
    as inside). Piecewise linear with a deliberate jump at rho_max."""
    if not ctx.inside:
        raise WrongCase("text lies outside the polygon")
    if ctx.rho <= params.rho_max:
        return 100.0 - 50.0 * ctx.rho
    return 50.0 - 25.0 * (ctx.rho - params.rho_max)


def score_nearby(ctx: ScoringContext, params: ScoreParams = ScoreParams()) -> float:
    """Base + size factor + distance factor for a label just outside."""
    if ctx.inside:
        raise WrongCase("text lies inside the polygon")
    if ctx.d_boundary >= params.d_max:
        raise WrongCase("text farther than the nearby threshold")
    f_size = 1.0 / (1.0 + math.log10(1.0 + ctx.area / 10000.0))
    f_dist = 1.0 - ctx.d_boundary / params.d_max
    return 40.0 + 30.0 * f_size + 20.0 * f_dist


@dataclass
class AssociationResult:
    assignments: list[Assignment] = field(default_factory=list)
    unassigned: list[TextAnnotation] = field(default_factory=list)


def associate_texts(texts: list[TextAnnotation], rooms_px: dict[int, list[Point]],
                    params: ScoreParams = ScoreParams()) -> AssociationResult:
    """Assign each text to its best-scoring room (strictly positive only).

    ``rooms_px`` maps room id to polygon in the pixel frame. Ties break
    toward the smaller room, then the lower room id.
    """
    result = AssociationResult()
    areas = {rid: ShapelyPolygon(poly).area for rid, poly in rooms_px.items()}

    for text in texts:
        best = None  # (score, area, room_id, case)
        for rid in sorted(rooms_px):
            ctx = ScoringContext.build(text.position, rooms_px[rid])
            if ctx.inside:
                score, case = score_inside(ctx, params), "inside"
            elif ctx.d_boundary < params.d_max:
                score, case = score_nearby(ctx, params), "nearby"
            else:
                continue
            if score <= 0:
                continue
            key = (-score, areas[rid], rid)
            if best is None or key < best[0]:
                best = (key, rid, score, case)
        if best is None:
            result.unassigned.append(text)
        else:
            _, rid, score, case = best
            result.assignments.append(Assignment(text, rid, score, case))
    return result


def apply_assignments(graph: AreaGraph, result: AssociationResult):
    """Inject name tags: first text per room names it, the rest are kept
    in osmAG:extra_text, semicolon-joined in assignment order."""
    for assignment in result.assignments:
        room = graph.room_by_id(assignment.room_id)
        if "name" not in room.tags:
            room.tags["name"] = assignment.text.content
            # source layer helps stair/elevator detection during fusion
            room.tags["osmAG:textLayer"] = assignment.text.source_layer
        elif "osmAG:extra_text" in room.tags:
            room.tags["osmAG:extra_text"] += ";" + assignment.text.content
        else:
            room.tags["osmAG:extra_text"] = assignment.text.content


def rooms_in_pixel_frame(graph: AreaGraph) -> dict[int, list[Point]]:
    """Room polygons converted from world meters to the raster pixel frame."""
    t = graph.transform
    return {room.id: [t.world_to_pixel(v) for v in room.polygon]
            for room in graph.rooms}


def texts_in_pixel_frame(texts: list[TextAnnotation], drawing_unit_scale: float,
                         graph: AreaGraph) -> list[TextAnnotation]:
    """Text anchors converted from drawing units to the raster pixel frame."""
    t = graph.transform
    out = []
    for text in texts:
        world = (text.position[0] * drawing_unit_scale,
                 text.position[1] * drawing_unit_scale)
        out.append(TextAnnotation(text.content, t.world_to_pixel(world),
                                  text.source_layer))
    return out
