"""Free-space segmentation into rooms and passages.

The pipeline is: exact Euclidean distance transform of free space, ridge
skeleton with per-vertex clearance, pruning of low-clearance leaf
branches, door-chord detection at local clearance minima, cutting the
free space along the chords, and merging back regions whose separating
constriction is wider than the ``alpha`` scale (such pinches are open
space, not doors). Region boundaries are traced along pixel cracks so
room polygon areas equal their pixel counts exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.morphology import medial_axis

from .errors import SegmentationBug
from .geometry import ensure_ccw, signed_area
from .raster import STRUCTURE_4, GridTransform, OccupancyGrid, \
    free_space_components

Point = tuple[float, float]

_NEIGHBORS_8 = ((1, 0), (0, 1), (1, 1), (1, -1),
                (-1, 0), (0, -1), (-1, -1), (-1, 1))
_FORWARD_8 = ((1, 0), (0, 1), (1, 1), (1, -1))


@dataclass(frozen=True)
class SegmentationParams:
    alpha: float = 1.2              # max width of a separating constriction, m
    prune_clearance: float = 0.25   # skeleton leaf pruning threshold, m
    door_max_width: float = 2.5     # widest opening still considered a door, m

    def __post_init__(self):
        if self.alpha <= 0 or self.prune_clearance <= 0 or self.door_max_width <= 0:
            raise ValueError("segmentation parameters must be positive")
        if self.door_max_width < self.prune_clearance:
            raise ValueError("door_max_width must be >= prune_clearance")


@dataclass
class VoronoiSkeleton:
    """Clearance skeleton of free space: pixel vertices plus 8-adjacency."""

    points: np.ndarray        # (N, 2) int, columns (x, y)
    clearance: np.ndarray     # (N,) meters, distance to nearest structure
    edges: np.ndarray         # (M, 2) int vertex indices
    edge_clearance: np.ndarray  # (M,) min clearance of the two endpoints
    component: np.ndarray     # (N,) interior free-space component label

    def __len__(self):
        return len(self.points)

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(len(self.points))]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


def _skeleton_from_mask(mask: np.ndarray, dist_px: np.ndarray,
                        labels: np.ndarray, resolution: float) -> VoronoiSkeleton:
    ys, xs = np.nonzero(mask)
    order = np.lexsort((xs, ys))  # deterministic row-major vertex order
    ys, xs = ys[order], xs[order]
    points = np.column_stack([xs, ys]).astype(np.int32)
    clearance = dist_px[ys, xs] * resolution
    component = labels[ys, xs]

    index = {(int(x), int(y)): i for i, (x, y) in enumerate(points)}
    edges = []
    for i, (x, y) in enumerate(points):
        for dx, dy in _FORWARD_8:
            j = index.get((int(x) + dx, int(y) + dy))
            if j is not None:
                edges.append((i, j))
    edges_arr = np.array(edges, dtype=np.int32) if edges else np.zeros((0, 2), np.int32)
    if len(edges_arr):
        edge_clear = np.minimum(clearance[edges_arr[:, 0]], clearance[edges_arr[:, 1]])
    else:
        edge_clear = np.zeros(0)
    return VoronoiSkeleton(points, clearance, edges_arr, edge_clear, component)


def compute_voronoi(grid: OccupancyGrid) -> VoronoiSkeleton:
    """Ridge skeleton of the interior free space with metric clearance.

    Vertices are free pixels on the medial ridge of the distance
    transform (points with more than one nearest obstacle); ridge
    thinning preserves the topology of each interior component, so the
    skeleton is connected per component.
    """
    fs = free_space_components(grid)
    dist_px = ndimage.distance_transform_edt(grid.free())
    interior = fs.interior_any()
    skel_mask = medial_axis(interior)
    # medial_axis can shave isolated single-pixel components; keep them
    lone = interior & (ndimage.convolve(interior.astype(np.uint8),
                                        np.ones((3, 3), np.uint8),
                                        mode="constant") == 1)
    skel_mask |= lone
    return _skeleton_from_mask(skel_mask, dist_px, fs.labels, grid.resolution)


def extract_skeleton(skel: VoronoiSkeleton, prune_clearance: float) -> VoronoiSkeleton:
    """Iteratively peel leaf vertices with clearance below the threshold.

    Cycles never produce leaves, so they are never pruned; degree-0
    vertices (single-pixel components) are always kept.
    """
    if prune_clearance <= 0 or len(skel) == 0:
        return skel
    adj = skel.adjacency()
    degree = np.array([len(a) for a in adj])
    alive = np.ones(len(skel), dtype=bool)
    stack = [i for i in range(len(skel))
             if degree[i] == 1 and skel.clearance[i] < prune_clearance]
    while stack:
        v = stack.pop()
        if not alive[v] or degree[v] != 1:
            continue
        alive[v] = False
        for u in adj[v]:
            if alive[u]:
                degree[u] -= 1
                if degree[u] == 1 and skel.clearance[u] < prune_clearance:
                    stack.append(u)
                elif degree[u] == 0:
                    pass  # last survivor of its branch, keep it
    remap = -np.ones(len(skel), dtype=np.int64)
    remap[alive] = np.arange(int(alive.sum()))
    keep_edges = alive[skel.edges[:, 0]] & alive[skel.edges[:, 1]] if len(skel.edges) else \
        np.zeros(0, bool)
    new_edges = remap[skel.edges[keep_edges]].astype(np.int32) if len(skel.edges) else skel.edges
    return VoronoiSkeleton(
        points=skel.points[alive],
        clearance=skel.clearance[alive],
        edges=new_edges,
        edge_clearance=skel.edge_clearance[keep_edges] if len(skel.edges) else skel.edge_clearance,
        component=skel.component[alive],
    )


# --------------------------------------------------------------------------
# door chords and region cutting
# --------------------------------------------------------------------------

@dataclass
class DoorChord:
    site_px: tuple[int, int]      # skeleton pixel that detected the door
    a_px: tuple[int, int]         # obstacle pixel on one jamb
    b_px: tuple[int, int]         # obstacle pixel on the opposite jamb
    width_m: float
    region_a: int = -1            # final region ids, filled by segmentation
    region_b: int = -1


@dataclass
class Segmentation:
    """Region labeling of interior free space plus surviving door chords."""

    labels: np.ndarray            # int array, 0 = not an interior region
    region_ids: list[int]
    chords: list[DoorChord]
    interior_free_pixels: int

    def region_mask(self, region_id: int) -> np.ndarray:
        return self.labels == region_id

    def region_masks(self) -> list[np.ndarray]:
        return [self.region_mask(r) for r in self.region_ids]


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # lower label wins so results do not depend on encounter order
            lo, hi = (ra, rb) if ra < rb else (rb, ra)
            self.parent[hi] = lo


def _local_minima(skel: VoronoiSkeleton) -> list[int]:
    adj = skel.adjacency()
    out = []
    for i in range(len(skel)):
        if not adj[i]:
            continue
        c = skel.clearance[i]
        nbr = [skel.clearance[j] for j in adj[i]]
        if all(n >= c - 1e-12 for n in nbr) and any(n > c + 1e-12 for n in nbr):
            out.append(i)
    return out


def _opposite_obstacle(p, a, occupied, max_steps_px):
    """March from skeleton pixel p away from its nearest obstacle a until
    structure is hit; that pixel is the opposite door jamb."""
    px, py = p
    ax, ay = a
    ux, uy = px - ax, py - ay
    norm = math.hypot(ux, uy)
    if norm == 0:
        return None
    ux, uy = ux / norm, uy / norm
    h, w = occupied.shape
    t = 0.5
    while t <= max_steps_px:
        qx = int(round(px + ux * t))
        qy = int(round(py + uy * t))
        if not (0 <= qx < w and 0 <= qy < h):
            return None
        if occupied[qy, qx]:
            return (qx, qy)
        t += 0.5
    return None


def _segment_distance(p1, p2, q1, q2):
    """Min distance between 2D segments p1p2 and q1q2."""
    def seg_pt(a, b, p):
        ax, ay = a
        bx, by = b
        dx, dy = bx - ax, by - ay
        den = dx * dx + dy * dy
        if den == 0:
            return math.dist(a, p)
        t = max(0.0, min(1.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / den))
        return math.dist((ax + t * dx, ay + t * dy), p)

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    # proper intersection means distance zero
    d1, d2 = orient(p1, p2, q1), orient(p1, p2, q2)
    d3, d4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return 0.0
    return min(seg_pt(p1, p2, q1), seg_pt(p1, p2, q2),
               seg_pt(q1, q2, p1), seg_pt(q1, q2, p2))


def _bresenham_px(a, b):
    x0, y0 = a
    x1, y1 = b
    dx, dy = abs(x1 - x0), abs(y1 - y0)
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


def alpha_shape_segment(skel: VoronoiSkeleton, grid: OccupancyGrid,
                        params: SegmentationParams) -> Segmentation:
    """Cut free space at door chords; merge back over-wide constrictions.

    A door chord is found at a skeleton point that is a local clearance
    minimum whose wall-to-wall width fits door_max_width. Regions whose
    separating chord is wider than alpha are fused again, which undoes
    spurious cuts in open space (e.g. at corridor mouths wider than any
    door).
    """
    fs = free_space_components(grid)
    interior = fs.interior_any()
    occupied = grid.cells
    res = grid.resolution
    _, (fy, fx) = ndimage.distance_transform_edt(grid.free(), return_indices=True)

    # --- candidate door sites -------------------------------------------
    candidates = []
    for i in _local_minima(skel):
        p = (int(skel.points[i, 0]), int(skel.points[i, 1]))
        clr_px = skel.clearance[i] / res
        if 2.0 * skel.clearance[i] > params.door_max_width + 2 * res:
            continue
        a = (int(fx[p[1], p[0]]), int(fy[p[1], p[0]]))
        b = _opposite_obstacle(p, a, occupied, max_steps_px=2 * clr_px + 6)
        if b is None:
            continue
        width = math.dist(a, b) * res
        if width > params.door_max_width:
            continue
        candidates.append(DoorChord(site_px=p, a_px=a, b_px=b, width_m=width))

    # shorter chords are the true constrictions; overlapping longer ones
    # from the same pinch are duplicates
    candidates.sort(key=lambda c: (c.width_m, c.site_px[1], c.site_px[0]))
    accepted: list[DoorChord] = []
    for cand in candidates:
        if any(_segment_distance(cand.a_px, cand.b_px, acc.a_px, acc.b_px) < 2.5
               for acc in accepted):
            continue
        accepted.append(cand)

    # --- cut and label ----------------------------------------------------
    cut = np.zeros_like(occupied)
    for chord in accepted:
        for x, y in _bresenham_px(chord.a_px, chord.b_px):
            cut[y, x] = True
    work = interior & ~cut
    labels, count = ndimage.label(work, structure=STRUCTURE_4)

    # identify the two regions flanking each chord
    dil = ndimage.generate_binary_structure(2, 2)
    separating: list[tuple[DoorChord, int, int]] = []
    for chord in accepted:
        line = np.zeros_like(occupied)
        for x, y in _bresenham_px(chord.a_px, chord.b_px):
            line[y, x] = True
        near = ndimage.binary_dilation(line, structure=dil)
        touched, counts = np.unique(labels[near & (labels > 0)], return_counts=True)
        if len(touched) < 2:
            continue  # cut did not separate anything; pixels reflow below
        order = np.argsort(counts)[::-1]
        la, lb = int(touched[order[0]]), int(touched[order[1]])
        separating.append((chord, la, lb))

    uf = _UnionFind(range(1, count + 1))
    for chord, la, lb in separating:
        if chord.width_m > params.alpha:
            uf.union(la, lb)

    # absorb raster specks that cannot carry a meaningful room polygon
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, range(1, count + 1))
    for lab, size in zip(range(1, count + 1), sizes):
        if size < 9:
            mask = labels == lab
            ring = ndimage.binary_dilation(mask, structure=dil) & ~mask
            nbr, ncnt = np.unique(labels[ring & (labels > 0)], return_counts=True)
            if len(nbr):
                uf.union(lab, int(nbr[np.argmax(ncnt)]))

    # --- finalize labels and chords ---------------------------------------
    root_map = np.zeros(count + 1, dtype=np.int64)
    final_ids: dict[int, int] = {}
    for lab in range(1, count + 1):
        root = uf.find(lab)
        if root not in final_ids:
            final_ids[root] = len(final_ids) + 1
        root_map[lab] = final_ids[root]
    final = root_map[labels]

    # cut pixels (and any non-separating remnants) are interior free space;
    # hand them to an adjacent region so coverage stays exact
    unassigned = interior & (final == 0)
    while np.any(unassigned):
        grow = ndimage.grey_dilation(final, footprint=STRUCTURE_4)
        final[unassigned] = grow[unassigned]
        still = interior & (final == 0)
        if np.count_nonzero(still) == np.count_nonzero(unassigned):
            raise SegmentationBug("region reassignment cannot make progress")
        unassigned = still

    passages: list[DoorChord] = []
    for chord, la, lb in separating:
        ra, rb = uf.find(la), uf.find(lb)
        if ra == rb:
            continue
        chord.region_a = final_ids[ra]
        chord.region_b = final_ids[rb]
        passages.append(chord)

    region_ids = sorted(set(final_ids.values()))
    return Segmentation(labels=final, region_ids=region_ids, chords=passages,
                        interior_free_pixels=int(np.count_nonzero(interior)))


# --------------------------------------------------------------------------
# boundary tracing and graph construction
# --------------------------------------------------------------------------

@dataclass
class RoomArea:
    id: int
    polygon: list[Point]          # CCW, world meters, closure implicit
    area_m2: float
    tags: dict[str, str] = field(default_factory=dict)


@dataclass
class Passage:
    id: int
    endpoints: tuple[Point, Point]
    room_a: int
    room_b: int


@dataclass
class AreaGraph:
    rooms: list[RoomArea]
    passages: list[Passage]
    transform: GridTransform
    source_floor: int | None = None
    interior_free_pixels: int = 0

    def room_by_id(self, room_id: int) -> RoomArea:
        for r in self.rooms:
            if r.id == room_id:
                return r
        raise KeyError(room_id)


def trace_region_outline(mask: np.ndarray) -> list[tuple[float, float]]:
    """Outer boundary of a pixel region as a corner-lattice polygon.

    Vertices are pixel-corner coordinates ((x, y) of the lower-left
    corner of pixel (x, y)); the ring is CCW and its shoelace area equals
    the pixel count (minus holes). Corners where the region pinches
    diagonally are nudged inward so the ring stays simple.
    """
    padded = np.pad(mask, 1)
    m = padded[1:-1, 1:-1]
    below = ~padded[0:-2, 1:-1]
    above = ~padded[2:, 1:-1]
    left = ~padded[1:-1, 0:-2]
    right = ~padded[1:-1, 2:]

    outgoing: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add_edges(sel, start_of, end_of):
        ys, xs = np.nonzero(sel)
        for x, y in zip(xs, ys):
            s = start_of(int(x), int(y))
            outgoing.setdefault(s, []).append(end_of(int(x), int(y)))

    add_edges(m & below, lambda x, y: (x, y), lambda x, y: (x + 1, y))
    add_edges(m & above, lambda x, y: (x + 1, y + 1), lambda x, y: (x, y + 1))
    add_edges(m & left, lambda x, y: (x, y + 1), lambda x, y: (x, y))
    add_edges(m & right, lambda x, y: (x + 1, y), lambda x, y: (x + 1, y + 1))

    def pick_next(prev_dir, options):
        # left-most turn keeps the region hugging the boundary on its left
        px, py = prev_dir

        def turn_rank(end, start):
            dx, dy = end[0] - start[0], end[1] - start[1]
            cross = px * dy - py * dx
            dot = px * dx + py * dy
            return -math.atan2(cross, dot)
        return min(options, key=lambda e: turn_rank(e, cur))

    loops: list[list[tuple[int, int]]] = []
    while outgoing:
        start = min(outgoing)
        cur = start
        prev_dir = (1, 0)
        loop = [cur]
        while True:
            opts = outgoing.get(cur)
            if not opts:
                raise SegmentationBug("open boundary chain during tracing")
            if len(opts) == 1:
                nxt = opts.pop()
                del outgoing[cur]
            else:
                nxt = pick_next(prev_dir, opts)
                opts.remove(nxt)
            prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
            cur = nxt
            if cur == start:
                break
            loop.append(cur)
        loops.append(loop)

    outer = max(loops, key=lambda lp: abs(signed_area(lp)))
    ring: list[tuple[float, float]] = [(float(x), float(y)) for x, y in outer]

    # nudge second visits of pinch corners inward to keep the ring simple
    seen: dict[tuple[float, float], int] = {}
    for idx, v in enumerate(ring):
        if v in seen:
            p = ring[idx - 1]
            n = ring[(idx + 1) % len(ring)]
            bx, by = (p[0] + n[0]) / 2 - v[0], (p[1] + n[1]) / 2 - v[1]
            norm = math.hypot(bx, by) or 1.0
            ring[idx] = (v[0] + 0.25 * bx / norm, v[1] + 0.25 * by / norm)
        else:
            seen[v] = idx
    return ensure_ccw(ring)


def _shared_boundary_endpoints(labels, region_a, region_b, chord, transform):
    """Endpoints of the crack-boundary stretch shared by the two regions
    near the chord; these corners lie on both room polygons exactly."""
    ax, ay = chord.a_px
    bx, by = chord.b_px
    mx, my = (ax + bx) / 2, (ay + by) / 2
    radius = math.dist(chord.a_px, chord.b_px) / 2 + 4

    h, w = labels.shape
    x0 = max(0, int(mx - radius) - 1)
    x1 = min(w, int(mx + radius) + 2)
    y0 = max(0, int(my - radius) - 1)
    y1 = min(h, int(my + radius) + 2)

    corners: set[tuple[int, int]] = set()
    win = labels[y0:y1, x0:x1]
    wa = win == region_a
    wb = win == region_b
    # horizontal neighbors a|b share the vertical crack between them
    for (ya, xa), (yb, xb), cs in (
        ((slice(None), slice(None, -1)), (slice(None), slice(1, None)), "v"),
        ((slice(None, -1), slice(None)), (slice(1, None), slice(None)), "h"),
    ):
        pair = (wa[ya, xa] & wb[yb, xb]) | (wb[ya, xa] & wa[yb, xb])
        yy, xx = np.nonzero(pair)
        for y, x in zip(yy, xx):
            gx, gy = x + x0, y + y0
            if cs == "v":
                corners.add((gx + 1, gy))
                corners.add((gx + 1, gy + 1))
            else:
                corners.add((gx, gy + 1))
                corners.add((gx + 1, gy + 1))

    corners = [c for c in corners
               if (c[0] - 0.5 - mx) ** 2 + (c[1] - 0.5 - my) ** 2 <= radius ** 2]
    if len(corners) >= 2:
        corners.sort()
        best = max(
            ((math.dist(c1, c2), c1, c2)
             for i, c1 in enumerate(corners) for c2 in corners[i + 1:]),
            key=lambda t: t[0])
        _, c1, c2 = best
        return (transform.corner_to_world((float(c1[0]), float(c1[1]))),
                transform.corner_to_world((float(c2[0]), float(c2[1]))))
    # fallback: jamb pixel centers
    return (transform.pixel_to_world(chord.a_px),
            transform.pixel_to_world(chord.b_px))


def build_area_graph(seg: Segmentation, grid: OccupancyGrid,
                     transform: GridTransform,
                     source_floor: int | None = None) -> AreaGraph:
    """Trace each region into a world-frame polygon and attach passages."""
    if not seg.region_ids:
        raise SegmentationBug("segmentation produced no regions")

    rooms: list[RoomArea] = []
    for rid in seg.region_ids:
        mask = seg.region_mask(rid)
        ring_corners = trace_region_outline(mask)
        polygon = [transform.corner_to_world(c) for c in ring_corners]
        area = signed_area(polygon)
        if area <= 0:
            raise SegmentationBug(f"region {rid} traced with non-positive area")
        rooms.append(RoomArea(id=rid, polygon=polygon, area_m2=area))

    passages: list[Passage] = []
    for k, chord in enumerate(seg.chords):
        if chord.region_a == chord.region_b:
            raise SegmentationBug("passage connects a region to itself")
        endpoints = _shared_boundary_endpoints(
            seg.labels, chord.region_a, chord.region_b, chord, transform)
        passages.append(Passage(id=k + 1, endpoints=endpoints,
                                room_a=chord.region_a, room_b=chord.region_b))

    return AreaGraph(rooms=rooms, passages=passages, transform=transform,
                     source_floor=source_floor,
                     interior_free_pixels=seg.interior_free_pixels)


def segment_grid(grid: OccupancyGrid, params: SegmentationParams,
                 source_floor: int | None = None):
    """Convenience chain: skeleton -> pruning -> cutting -> graph."""
    vd = compute_voronoi(grid)
    skel = extract_skeleton(vd, params.prune_clearance)
    seg = alpha_shape_segment(skel, grid, params)
    graph = build_area_graph(seg, grid, grid.transform, source_floor)
    return graph, seg, skel
