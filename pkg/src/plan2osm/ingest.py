"""ASCII DXF parsing, layer filtering and text extraction.

The parser reads the R12-and-later group-code subset needed for floor
plans: LINE, LWPOLYLINE, POLYLINE/VERTEX, ARC, CIRCLE, TEXT, MTEXT and
INSERT expansion up to depth 4. Everything else is counted and reported,
never an error. Binary DXF is rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

from .errors import EmptyDocument, NoStructuralLayers, ParseError

Point = tuple[float, float]

# $INSUNITS codes -> meters per drawing unit (subset that occurs in plans)
_INSUNITS_TO_METERS = {
    1: 0.0254,   # inches
    2: 0.3048,   # feet
    4: 0.001,    # millimeters
    5: 0.01,     # centimeters
    6: 1.0,      # meters
    14: 0.1,     # decimeters
}
_METERS_TO_INSUNITS = {v: k for k, v in _INSUNITS_TO_METERS.items()}

DEFAULT_UNIT_SCALE = 0.001  # 1 drawing unit = 1 mm when header absent

# US NCS discipline-layer keywords that indicate permanent structure.
DEFAULT_INCLUDE_KEYWORDS = ("WALL", "STAIR", "COLS", "COLUMN", "GLAZ", "WIND", "DOOR")

_MAX_INSERT_DEPTH = 4


@dataclass(frozen=True)
class Line:
    start: Point
    end: Point


@dataclass(frozen=True)
class Polyline:
    vertices: tuple[Point, ...]
    closed: bool = False

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("polyline needs at least 2 vertices")


@dataclass(frozen=True)
class Arc:
    center: Point
    radius: float
    start_angle: float  # degrees, CCW from +x
    end_angle: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("arc radius must be positive")


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")


@dataclass(frozen=True)
class Text:
    anchor: Point
    content: str
    height: float = 0.0

    def __post_init__(self):
        if not self.content.strip():
            raise ValueError("text content empty after trimming")


CadEntity = Line | Polyline | Arc | Circle | Text


@dataclass(frozen=True)
class Box:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def width(self):
        return self.max_x - self.min_x

    @property
    def height(self):
        return self.max_y - self.min_y


@dataclass
class CadDocument:
    """Layered vector drawing in drawing units."""

    layers: dict[str, list[CadEntity]]
    drawing_unit_scale: float  # meters per drawing unit
    extents: Box
    unsupported: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.drawing_unit_scale <= 0:
            raise ValueError("drawing_unit_scale must be positive")

    def entity_count(self):
        return sum(len(v) for v in self.layers.values())

    def layer_entity_counts(self):
        """{layer name: entity count} for debug dumps and the review UI."""
        return {name: len(ents) for name, ents in sorted(self.layers.items())}


@dataclass(frozen=True)
class TextAnnotation:
    content: str
    position: Point
    source_layer: str

    def __post_init__(self):
        if not self.content.strip():
            raise ValueError("annotation content empty after trimming")


@dataclass(frozen=True)
class LayerFilter:
    """Keyword- or explicit-list-based structural layer selection."""

    include_keywords: tuple[str, ...] = DEFAULT_INCLUDE_KEYWORDS
    exclude_keywords: tuple[str, ...] = ()
    explicit_layers: tuple[str, ...] | None = None
    text_layers: tuple[str, ...] | None = None

    def __post_init__(self):
        inc = {k.upper() for k in self.include_keywords}
        exc = {k.upper() for k in self.exclude_keywords}
        if inc & exc:
            raise ValueError(f"include/exclude keywords overlap: {sorted(inc & exc)}")

    def matches(self, layer_name: str) -> bool:
        if self.explicit_layers is not None:
            return layer_name in self.explicit_layers
        upper = layer_name.upper()
        if any(kw.upper() in upper for kw in self.exclude_keywords):
            return False
        return any(kw.upper() in upper for kw in self.include_keywords)

    def is_text_layer(self, layer_name: str) -> bool:
        return self.text_layers is None or layer_name in self.text_layers


@dataclass
class FilterResult:
    document: CadDocument
    dropped_layers: list[str]


# --------------------------------------------------------------------------
# group-code tokenizer
# --------------------------------------------------------------------------

def _tokenize(data: bytes) -> list[tuple[int, str, int]]:
    """Split raw bytes into (group code, value, byte offset) triples."""
    if data.startswith(b"AutoCAD Binary DXF"):
        raise ParseError("binary DXF is not supported", 0)
    lines = []
    offset = 0
    for raw in data.splitlines(keepends=True):
        lines.append((offset, raw))
        offset += len(raw)
    # trailing blank lines are noise, not a truncated pair
    while lines and not lines[-1][1].strip():
        lines.pop()
    if not lines:
        raise EmptyDocument("no content")

    pairs = []
    i = 0
    while i < len(lines):
        code_off, code_raw = lines[i]
        code_txt = code_raw.decode("ascii", errors="replace").strip()
        try:
            code = int(code_txt)
        except ValueError:
            raise ParseError(f"expected integer group code, got {code_txt!r}", code_off)
        if i + 1 >= len(lines):
            raise ParseError("file truncated: group code without value", code_off)
        _, value_raw = lines[i + 1]
        value = value_raw.decode("utf-8", errors="replace").strip()
        pairs.append((code, value, code_off))
        i += 2
    return pairs


class _Cursor:
    def __init__(self, pairs):
        self.pairs = pairs
        self.i = 0

    def eof(self):
        return self.i >= len(self.pairs)

    def peek(self):
        return self.pairs[self.i]

    def next(self):
        p = self.pairs[self.i]
        self.i += 1
        return p


def _collect_record(cur: _Cursor) -> dict[int, list[str]]:
    """Collect codes of one entity record (up to, not including, next code 0)."""
    rec: dict[int, list[str]] = {}
    while not cur.eof():
        code, value, _ = cur.peek()
        if code == 0:
            break
        rec.setdefault(code, []).append(value)
        cur.next()
    return rec


def _f(rec, code, default=None, index=0):
    vals = rec.get(code)
    if not vals or index >= len(vals):
        if default is None:
            raise KeyError(f"missing group code {code}")
        return default
    return float(vals[index])


_MTEXT_FORMAT = re.compile(
    r"\\[A-Za-z][^;\\{}]*;"   # \H2.5; \fArial|b0; \C1; etc.
    r"|[{}]"                  # group braces
    r"|\\~"                   # non-breaking space
)


def _strip_mtext(raw: str) -> str:
    """Reduce MTEXT inline formatting to plain text; \\P becomes a newline."""
    text = raw.replace("\\\\", "\x00").replace("\\P", "\n").replace("\\p", "\n")
    text = _MTEXT_FORMAT.sub(lambda m: " " if m.group() == "\\~" else "", text)
    return text.replace("\x00", "\\")


def _entity_from_record(etype: str, rec: dict) -> CadEntity | None:
    if etype == "LINE":
        return Line((_f(rec, 10), _f(rec, 20)), (_f(rec, 11), _f(rec, 21)))
    if etype == "LWPOLYLINE":
        xs = rec.get(10, [])
        ys = rec.get(20, [])
        verts = tuple((float(x), float(y)) for x, y in zip(xs, ys))
        closed = int(float(rec.get(70, ["0"])[0])) & 1 == 1
        if len(verts) < 2:
            return None
        return Polyline(verts, closed)
    if etype == "ARC":
        return Arc((_f(rec, 10), _f(rec, 20)), _f(rec, 40),
                   _f(rec, 50, 0.0), _f(rec, 51, 360.0))
    if etype == "CIRCLE":
        return Circle((_f(rec, 10), _f(rec, 20)), _f(rec, 40))
    if etype == "TEXT":
        content = rec.get(1, [""])[0]
        if not content.strip():
            return None
        return Text((_f(rec, 10), _f(rec, 20)), content, _f(rec, 40, 0.0))
    if etype == "MTEXT":
        # long MTEXT bodies arrive as code-3 chunks followed by one code-1 tail
        content = "".join(rec.get(3, [])) + rec.get(1, [""])[0]
        content = _strip_mtext(content)
        if not content.strip():
            return None
        return Text((_f(rec, 10), _f(rec, 20)), content, _f(rec, 40, 0.0))
    return None


_SUPPORTED = {"LINE", "LWPOLYLINE", "ARC", "CIRCLE", "TEXT", "MTEXT"}


class _EntityCollector:
    """Accumulates entities of one container (ENTITIES section or a block),
    including the POLYLINE/VERTEX/SEQEND state machine."""

    def __init__(self, unsupported, warnings):
        self.items: list[tuple[str, CadEntity | dict]] = []
        self.unsupported = unsupported
        self.warnings = warnings
        self._pending = None  # (layer, closed, [verts]) during POLYLINE

    def flush_pending(self):
        if self._pending is None:
            return
        layer, closed, verts = self._pending
        self._pending = None
        if len(verts) >= 2:
            self.items.append((layer, Polyline(tuple(verts), closed)))
        else:
            self.warnings.append("POLYLINE with fewer than 2 vertices skipped")

    def add(self, etype: str, rec: dict):
        layer = rec.get(8, ["0"])[0]
        if etype == "POLYLINE":
            self.flush_pending()
            closed = int(float(rec.get(70, ["0"])[0])) & 1 == 1
            self._pending = (layer, closed, [])
            return
        if etype == "VERTEX":
            if self._pending is not None:
                try:
                    self._pending[2].append((_f(rec, 10), _f(rec, 20)))
                except KeyError:
                    self.warnings.append("VERTEX without coordinates skipped")
            return
        if etype == "SEQEND":
            self.flush_pending()
            return
        if etype == "INSERT":
            self.items.append((layer, rec))  # expanded once blocks are known
            return
        if etype in _SUPPORTED:
            try:
                ent = _entity_from_record(etype, rec)
            except (KeyError, ValueError) as exc:
                self.warnings.append(f"{etype} entity skipped: {exc}")
                return
            if ent is not None:
                self.items.append((layer, ent))
            else:
                self.warnings.append(f"{etype} entity degenerate; skipped")
            return
        self.unsupported[etype] = self.unsupported.get(etype, 0) + 1


def _transform_point(p: Point, base: Point, sx: float, sy: float,
                     cos_r: float, sin_r: float, insert: Point) -> Point:
    x = (p[0] - base[0]) * sx
    y = (p[1] - base[1]) * sy
    return (insert[0] + x * cos_r - y * sin_r,
            insert[1] + x * sin_r + y * cos_r)


def _tessellate_arc(center, radius, a0_deg, a1_deg, segments=64):
    a0 = math.radians(a0_deg)
    a1 = math.radians(a1_deg)
    while a1 <= a0:
        a1 += 2 * math.pi
    pts = []
    for k in range(segments + 1):
        a = a0 + (a1 - a0) * k / segments
        pts.append((center[0] + radius * math.cos(a), center[1] + radius * math.sin(a)))
    return tuple(pts)


def _expand_insert(rec, blocks, depth, out, warnings):
    name = rec.get(2, [None])[0]
    if name is None or name not in blocks:
        warnings.append(f"INSERT references unknown block {name!r}; skipped")
        return
    if depth > _MAX_INSERT_DEPTH:
        warnings.append(f"block {name!r} nested deeper than {_MAX_INSERT_DEPTH}; skipped")
        return
    base, members = blocks[name]
    insert = (_f(rec, 10, 0.0), _f(rec, 20, 0.0))
    sx = _f(rec, 41, 1.0)
    sy = _f(rec, 42, 1.0)
    rot = math.radians(_f(rec, 50, 0.0))
    cos_r, sin_r = math.cos(rot), math.sin(rot)

    def tp(p):
        return _transform_point(p, base, sx, sy, cos_r, sin_r, insert)

    uniform = math.isclose(abs(sx), abs(sy))
    for layer, ent in members:
        if isinstance(ent, dict):  # nested INSERT
            nested = dict(ent)
            nested_insert = tp((_f(ent, 10, 0.0), _f(ent, 20, 0.0)))
            nested[10] = [repr(nested_insert[0])]
            nested[20] = [repr(nested_insert[1])]
            nested[41] = [repr(_f(ent, 41, 1.0) * sx)]
            nested[42] = [repr(_f(ent, 42, 1.0) * sy)]
            nested[50] = [repr(_f(ent, 50, 0.0) + math.degrees(rot))]
            _expand_insert(nested, blocks, depth + 1, out, warnings)
            continue
        if isinstance(ent, Line):
            out.append((layer, Line(tp(ent.start), tp(ent.end))))
        elif isinstance(ent, Polyline):
            out.append((layer, Polyline(tuple(tp(v) for v in ent.vertices), ent.closed)))
        elif isinstance(ent, (Arc, Circle)):
            if uniform:
                r = ent.radius * abs(sx)
                c = tp(ent.center)
                if isinstance(ent, Circle):
                    out.append((layer, Circle(c, r)))
                else:
                    rot_deg = math.degrees(rot)
                    out.append((layer, Arc(c, r, ent.start_angle + rot_deg,
                                           ent.end_angle + rot_deg)))
            else:
                # non-uniform scale turns the arc into an ellipse; flatten it
                a0, a1 = (0.0, 360.0) if isinstance(ent, Circle) else (ent.start_angle, ent.end_angle)
                pts = tuple(tp(p) for p in _tessellate_arc(ent.center, ent.radius, a0, a1))
                out.append((layer, Polyline(pts, isinstance(ent, Circle))))
        elif isinstance(ent, Text):
            out.append((layer, Text(tp(ent.anchor), ent.content,
                                    ent.height * abs(sy))))


def _entity_points(ent: CadEntity):
    if isinstance(ent, Line):
        yield ent.start
        yield ent.end
    elif isinstance(ent, Polyline):
        yield from ent.vertices
    elif isinstance(ent, Arc):
        yield from _tessellate_arc(ent.center, ent.radius, ent.start_angle,
                                   ent.end_angle, segments=32)
    elif isinstance(ent, Circle):
        c, r = ent.center, ent.radius
        yield (c[0] - r, c[1] - r)
        yield (c[0] + r, c[1] + r)
    elif isinstance(ent, Text):
        yield ent.anchor


def _compute_extents(pairs) -> Box:
    xs, ys = [], []
    for _, ent in pairs:
        for x, y in _entity_points(ent):
            xs.append(x)
            ys.append(y)
    return Box(min(xs), min(ys), max(xs), max(ys))


def parse_dxf(data: bytes) -> CadDocument:
    """Parse an ASCII DXF byte string into a layered CadDocument.

    Unsupported entity kinds are tallied in ``doc.unsupported``; blocks
    are expanded through INSERT up to depth 4. The metric scale comes
    from $INSUNITS and defaults to millimeters with a warning.
    """
    pairs = _tokenize(data)
    cur = _Cursor(pairs)

    insunits = None
    blocks: dict[str, tuple[Point, list]] = {}
    unsupported: dict[str, int] = {}
    warnings: list[str] = []
    entities = _EntityCollector(unsupported, warnings)

    section = None
    block_name = None
    block_base = (0.0, 0.0)
    block_collector = None

    while not cur.eof():
        code, value, off = cur.next()
        if code == 0:
            if value == "SECTION":
                if cur.eof():
                    raise ParseError("SECTION without name", off)
                c2, name, _ = cur.next()
                if c2 != 2:
                    raise ParseError("SECTION without name", off)
                section = name
            elif value == "ENDSEC":
                entities.flush_pending()
                if block_collector is not None:
                    block_collector.flush_pending()
                section = None
            elif value == "EOF":
                break
            elif section == "BLOCKS":
                if value == "BLOCK":
                    rec = _collect_record(cur)
                    block_name = rec.get(2, [""])[0]
                    block_base = (_f(rec, 10, 0.0), _f(rec, 20, 0.0))
                    block_collector = _EntityCollector(unsupported, warnings)
                elif value == "ENDBLK":
                    if block_collector is not None:
                        block_collector.flush_pending()
                        if block_name:
                            blocks[block_name] = (block_base, block_collector.items)
                    block_name = None
                    block_collector = None
                elif block_collector is not None:
                    block_collector.add(value, _collect_record(cur))
            elif section == "ENTITIES":
                entities.add(value, _collect_record(cur))
            # other sections (TABLES, OBJECTS, ...) are skipped record-wise
        elif section == "HEADER" and code == 9 and value == "$INSUNITS":
            rec = _collect_record(cur)
            try:
                insunits = int(float(rec.get(70, ["0"])[0]))
            except ValueError:
                warnings.append("$INSUNITS not numeric; using default")

    entities.flush_pending()

    if insunits is None:
        scale = DEFAULT_UNIT_SCALE
        warnings.append("$INSUNITS header absent; assuming 1 unit = 1 mm")
    elif insunits in _INSUNITS_TO_METERS:
        scale = _INSUNITS_TO_METERS[insunits]
    else:
        scale = DEFAULT_UNIT_SCALE
        warnings.append(f"$INSUNITS={insunits} unrecognized; assuming 1 unit = 1 mm")

    # expand INSERTs (raw dict records) against the block table
    final: list[tuple[str, CadEntity]] = []
    for layer, ent in entities.items:
        if isinstance(ent, dict):
            _expand_insert(ent, blocks, 1, final, warnings)
        else:
            final.append((layer, ent))

    if not final:
        raise EmptyDocument("document has no supported entities")

    layers: dict[str, list[CadEntity]] = {}
    for layer, ent in final:
        layers.setdefault(layer, []).append(ent)

    return CadDocument(
        layers=layers,
        drawing_unit_scale=scale,
        extents=_compute_extents(final),
        unsupported=unsupported,
        warnings=warnings,
    )


# --------------------------------------------------------------------------
# layer filtering and text extraction
# --------------------------------------------------------------------------

def filter_layers(doc: CadDocument, layer_filter: LayerFilter) -> FilterResult:
    """Keep only structural layers; report what was dropped.

    Raises NoStructuralLayers when nothing survives, which is the signal
    for manual layer selection in the review UI.
    """
    kept: dict[str, list[CadEntity]] = {}
    dropped: list[str] = []
    for name, entities in doc.layers.items():
        if layer_filter.matches(name):
            kept[name] = list(entities)
        else:
            dropped.append(name)
    if not kept:
        raise NoStructuralLayers(
            f"no layer matched the filter (layers: {sorted(doc.layers)})")
    filtered = replace(doc, layers=kept,
                       extents=_compute_extents(
                           [(n, e) for n, ents in kept.items() for e in ents]))
    return FilterResult(document=filtered, dropped_layers=sorted(dropped))


def extract_text(doc: CadDocument, layer_filter: LayerFilter) -> list[TextAnnotation]:
    """One annotation per text line, anchored at the insertion point.

    Multi-line MTEXT yields one annotation per line, each shifted down
    by the text height.
    """
    annotations: list[TextAnnotation] = []
    for name, entities in sorted(doc.layers.items()):
        if not layer_filter.is_text_layer(name):
            continue
        for ent in entities:
            if not isinstance(ent, Text):
                continue
            lines = [ln.strip() for ln in ent.content.split("\n")]
            for k, line in enumerate(lines):
                if not line:
                    continue
                pos = (ent.anchor[0], ent.anchor[1] - k * ent.height)
                annotations.append(TextAnnotation(line, pos, name))
    return annotations


# --------------------------------------------------------------------------
# DXF writer (supported subset), used for fixtures and round-trip checks
# --------------------------------------------------------------------------

def _w(out, code, value):
    out.append(str(code))
    out.append(str(value))


def to_dxf_bytes(doc: CadDocument) -> bytes:
    """Serialize the supported entity subset back to ASCII DXF.

    Coordinates are written with repr() so a parse round-trip is exact.
    """
    out: list[str] = []
    _w(out, 0, "SECTION")
    _w(out, 2, "HEADER")
    code = _METERS_TO_INSUNITS.get(doc.drawing_unit_scale)
    if code is not None:
        _w(out, 9, "$INSUNITS")
        _w(out, 70, code)
    _w(out, 0, "ENDSEC")
    _w(out, 0, "SECTION")
    _w(out, 2, "ENTITIES")
    for layer in doc.layers:
        for ent in doc.layers[layer]:
            if isinstance(ent, Line):
                _w(out, 0, "LINE")
                _w(out, 8, layer)
                _w(out, 10, repr(ent.start[0]))
                _w(out, 20, repr(ent.start[1]))
                _w(out, 11, repr(ent.end[0]))
                _w(out, 21, repr(ent.end[1]))
            elif isinstance(ent, Polyline):
                _w(out, 0, "LWPOLYLINE")
                _w(out, 8, layer)
                _w(out, 90, len(ent.vertices))
                _w(out, 70, 1 if ent.closed else 0)
                for x, y in ent.vertices:
                    _w(out, 10, repr(x))
                    _w(out, 20, repr(y))
            elif isinstance(ent, Arc):
                _w(out, 0, "ARC")
                _w(out, 8, layer)
                _w(out, 10, repr(ent.center[0]))
                _w(out, 20, repr(ent.center[1]))
                _w(out, 40, repr(ent.radius))
                _w(out, 50, repr(ent.start_angle))
                _w(out, 51, repr(ent.end_angle))
            elif isinstance(ent, Circle):
                _w(out, 0, "CIRCLE")
                _w(out, 8, layer)
                _w(out, 10, repr(ent.center[0]))
                _w(out, 20, repr(ent.center[1]))
                _w(out, 40, repr(ent.radius))
            elif isinstance(ent, Text):
                if "\n" in ent.content:
                    _w(out, 0, "MTEXT")
                    _w(out, 8, layer)
                    _w(out, 10, repr(ent.anchor[0]))
                    _w(out, 20, repr(ent.anchor[1]))
                    _w(out, 40, repr(ent.height))
                    _w(out, 1, ent.content.replace("\\", "\\\\").replace("\n", "\\P"))
                else:
                    _w(out, 0, "TEXT")
                    _w(out, 8, layer)
                    _w(out, 10, repr(ent.anchor[0]))
                    _w(out, 20, repr(ent.anchor[1]))
                    _w(out, 40, repr(ent.height))
                    _w(out, 1, ent.content)
    _w(out, 0, "ENDSEC")
    _w(out, 0, "EOF")
    return ("\n".join(out) + "\n").encode("utf-8")
