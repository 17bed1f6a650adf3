"""Vector-to-occupancy-grid conversion and morphological cleanup.

Grids are boolean numpy arrays indexed [y, x] with y increasing upward;
cell value True means structure (occupied). The world<->pixel transform
maps pixel centers: pixel (0,0) center sits at ``origin_world``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import DegenerateExtents, InvalidResolution, NoInteriorSpace
from .ingest import Arc, CadDocument, Circle, Line, Point, Polyline, Text

RESOLUTION_RANGE = (0.005, 0.2)
GRID_PADDING_PX = 2

# 4-connectivity for free space, 8 for structure: keeps free space from
# leaking through diagonal wall joints.
STRUCTURE_4 = ndimage.generate_binary_structure(2, 1)
STRUCTURE_8 = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True)
class GridTransform:
    resolution: float       # meters per pixel
    origin_world: Point     # world meters of pixel (0,0) center

    def world_to_pixel(self, p: Point) -> tuple[float, float]:
        return ((p[0] - self.origin_world[0]) / self.resolution,
                (p[1] - self.origin_world[1]) / self.resolution)

    def pixel_to_world(self, px: tuple[float, float]) -> Point:
        return (self.origin_world[0] + px[0] * self.resolution,
                self.origin_world[1] + px[1] * self.resolution)

    def corner_to_world(self, corner: tuple[float, float]) -> Point:
        """Pixel-corner coordinates: corner (i, j) is the lower-left corner
        of pixel (i, j), i.e. offset (-0.5, -0.5) from the center."""
        return (self.origin_world[0] + (corner[0] - 0.5) * self.resolution,
                self.origin_world[1] + (corner[1] - 0.5) * self.resolution)


@dataclass
class OccupancyGrid:
    width: int
    height: int
    resolution: float
    origin_world: Point
    cells: np.ndarray  # bool, shape (height, width), True = occupied

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells.shape != (self.height, self.width):
            raise ValueError("cells shape does not match width/height")

    @property
    def transform(self) -> GridTransform:
        return GridTransform(self.resolution, self.origin_world)

    def free(self) -> np.ndarray:
        return ~self.cells


@dataclass
class FreeSpace:
    """4-connected labeling of free cells; exterior is the border component."""

    labels: np.ndarray          # int labels, 0 = occupied
    exterior_label: int
    interior_labels: list[int]

    def interior_mask(self, label: int) -> np.ndarray:
        return self.labels == label

    def interior_any(self) -> np.ndarray:
        return np.isin(self.labels, self.interior_labels)


def disk(radius: int) -> np.ndarray:
    """Euclidean disk structuring element (rotation-invariant closure)."""
    y, x = np.ogrid[-radius:radius + 1, -radius:radius + 1]
    return x * x + y * y <= radius * radius


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    """Integer line stroke, endpoints inclusive."""
    dx = abs(x1 - x0)
    dy = abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while True:
        yield x, y
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def _arc_points(center, radius, a0_deg, a1_deg, max_chord_error):
    """Tessellate an arc so the sagitta never exceeds max_chord_error."""
    a0 = math.radians(a0_deg)
    a1 = math.radians(a1_deg)
    while a1 <= a0:
        a1 += 2 * math.pi
    sweep = a1 - a0
    if max_chord_error >= radius:
        step = math.pi / 4
    else:
        step = 2 * math.acos(max(0.0, 1.0 - max_chord_error / radius))
    n = max(8, int(math.ceil(sweep / max(step, 1e-9))))
    return [(center[0] + radius * math.cos(a0 + sweep * k / n),
             center[1] + radius * math.sin(a0 + sweep * k / n))
            for k in range(n + 1)]


def _entity_segments(ent, max_chord_error_du):
    if isinstance(ent, Line):
        yield ent.start, ent.end
    elif isinstance(ent, Polyline):
        verts = ent.vertices
        for a, b in zip(verts, verts[1:]):
            yield a, b
        if ent.closed:
            yield verts[-1], verts[0]
    elif isinstance(ent, Arc):
        pts = _arc_points(ent.center, ent.radius, ent.start_angle, ent.end_angle,
                          max_chord_error_du)
        for a, b in zip(pts, pts[1:]):
            yield a, b
    elif isinstance(ent, Circle):
        pts = _arc_points(ent.center, ent.radius, 0.0, 360.0, max_chord_error_du)
        for a, b in zip(pts, pts[1:]):
            yield a, b


def rasterize(doc: CadDocument, resolution: float) -> OccupancyGrid:
    """Draw all structural geometry as 1-px strokes at the given metric scale.

    Text entities are ignored here; arcs are tessellated at chord error
    <= resolution/2. The grid gets a 2-px free padding ring.
    """
    if not (RESOLUTION_RANGE[0] <= resolution <= RESOLUTION_RANGE[1]):
        raise InvalidResolution(
            f"resolution {resolution} outside {RESOLUTION_RANGE} m/px")

    scale = doc.drawing_unit_scale
    structural = [ent for ents in doc.layers.values() for ent in ents
                  if not isinstance(ent, Text)]
    if not structural:
        raise DegenerateExtents("no structural entities to rasterize")

    xs, ys = [], []
    # chord error res/4 leaves headroom so pixel centers stay within one
    # resolution of the true curve even after Bresenham rounding
    max_chord_error_du = (resolution / 4) / scale
    segments = []
    for ent in structural:
        for a, b in _entity_segments(ent, max_chord_error_du):
            segments.append((a, b))
            xs.extend((a[0], b[0]))
            ys.extend((a[1], b[1]))

    min_x, max_x = min(xs) * scale, max(xs) * scale
    min_y, max_y = min(ys) * scale, max(ys) * scale
    if max_x - min_x <= 0 and max_y - min_y <= 0:
        raise DegenerateExtents("document extents have zero area")

    pad = GRID_PADDING_PX
    width = int(math.ceil((max_x - min_x) / resolution)) + 2 * pad + 1
    height = int(math.ceil((max_y - min_y) / resolution)) + 2 * pad + 1
    origin = (min_x - pad * resolution, min_y - pad * resolution)
    transform = GridTransform(resolution, origin)

    cells = np.zeros((height, width), dtype=bool)
    for a, b in segments:
        ax, ay = transform.world_to_pixel((a[0] * scale, a[1] * scale))
        bx, by = transform.world_to_pixel((b[0] * scale, b[1] * scale))
        for x, y in _bresenham(round(ax), round(ay), round(bx), round(by)):
            if 0 <= x < width and 0 <= y < height:
                cells[y, x] = True

    grid = OccupancyGrid(width, height, resolution, origin, cells)
    _clear_border_ring(grid.cells)
    return grid


def _clear_border_ring(cells: np.ndarray):
    cells[0, :] = False
    cells[-1, :] = False
    cells[:, 0] = False
    cells[:, -1] = False


def thicken_and_close(grid: OccupancyGrid, wall_thickness_px: int,
                      gap_bridge_px: int) -> OccupancyGrid:
    """Dilate walls, then close small discontinuities.

    Dilation radius is ceil(wall_thickness_px/2); closing uses a disk of
    radius gap_bridge_px. Gaps narrower than roughly twice the combined
    radii get sealed, wider door openings survive. The 1-px border ring
    is re-cleared afterwards so the exterior stays connected.
    """
    if wall_thickness_px < 1:
        raise ValueError("wall_thickness_px must be >= 1")
    if gap_bridge_px < 0:
        raise ValueError("gap_bridge_px must be >= 0")
    occ = ndimage.binary_dilation(
        grid.cells, structure=disk(int(math.ceil(wall_thickness_px / 2))))
    if gap_bridge_px > 0:
        # erosion border_value=1 keeps closing extensive at the array edge
        se = disk(gap_bridge_px)
        occ = ndimage.binary_erosion(ndimage.binary_dilation(occ, structure=se),
                                     structure=se, border_value=1)
    occ = occ.copy()
    _clear_border_ring(occ)
    return replace(grid, cells=occ)


def free_space_components(grid: OccupancyGrid) -> FreeSpace:
    """Label free space 4-connected; split exterior from interior components."""
    labels, count = ndimage.label(grid.free(), structure=STRUCTURE_4)
    if count == 0:
        raise NoInteriorSpace("grid has no free space at all")
    # the border ring is free by construction, so the exterior is one label
    exterior = int(labels[0, 0])
    interior = [int(l) for l in range(1, count + 1) if l != exterior]
    if not interior:
        raise NoInteriorSpace("no enclosed free-space component found")
    return FreeSpace(labels=labels, exterior_label=exterior,
                     interior_labels=interior)


def to_pgm(grid: OccupancyGrid) -> bytes:
    """Binary PGM (P5) debug rendering: occupied black, free white.

    Rows are flipped so the image appears in conventional orientation.
    """
    img = np.where(grid.cells, 0, 255).astype(np.uint8)[::-1, :]
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + img.tobytes()
