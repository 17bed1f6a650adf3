import math

import numpy as np
import pytest
from scipy import ndimage

from plan2osm.errors import DegenerateExtents, InvalidResolution, NoInteriorSpace
from plan2osm.ingest import Box, CadDocument, Circle, Line
from plan2osm.raster import (OccupancyGrid, free_space_components, rasterize,
                             thicken_and_close, to_pgm)

RES = 0.05


def doc_of(entities, scale=1.0):
    xs = []
    ys = []
    for e in entities:
        if isinstance(e, Line):
            xs += [e.start[0], e.end[0]]
            ys += [e.start[1], e.end[1]]
        elif isinstance(e, Circle):
            xs += [e.center[0] - e.radius, e.center[0] + e.radius]
            ys += [e.center[1] - e.radius, e.center[1] + e.radius]
    return CadDocument(layers={"A-WALL": list(entities)}, drawing_unit_scale=scale,
                       extents=Box(min(xs), min(ys), max(xs), max(ys)))


def grid_of(cells):
    arr = np.asarray(cells, dtype=bool)
    h, w = arr.shape
    return OccupancyGrid(w, h, RES, (0.0, 0.0), arr)


class TestRasterize:
    def test_horizontal_line_stroke_length(self):
        grid = rasterize(doc_of([Line((0.0, 0.0), (10.0, 0.0)),
                                 Line((0.0, 3.0), (10.0, 3.0))]), RES)
        row_counts = grid.cells.sum(axis=1)
        stroke = max(row_counts)
        assert abs(stroke - (10.0 / RES + 1)) <= 1

    def test_axis_aligned_metric_fidelity(self):
        for length in (2.0, 5.5, 14.3):
            grid = rasterize(doc_of([Line((0.0, 0.0), (length, 0.0)),
                                     Line((0.0, 1.0), (length, 1.0))]), RES)
            stroke = max(grid.cells.sum(axis=1))
            assert length / RES - 2 <= stroke <= length / RES + 2

    def test_resolution_range_enforced(self):
        doc = doc_of([Line((0.0, 0.0), (1.0, 1.0))])
        with pytest.raises(InvalidResolution):
            rasterize(doc, 0.001)
        with pytest.raises(InvalidResolution):
            rasterize(doc, 0.5)

    def test_empty_entities_degenerate(self):
        doc = CadDocument(layers={"A-WALL": []}, drawing_unit_scale=1.0,
                          extents=Box(0, 0, 0, 0))
        with pytest.raises(DegenerateExtents):
            rasterize(doc, RES)

    def test_circle_pixels_near_analytic_ring(self):
        grid = rasterize(doc_of([Circle((0.0, 0.0), 1.0)]), RES)
        t = grid.transform
        ys, xs = np.nonzero(grid.cells)
        for x, y in zip(xs, ys):
            wx, wy = t.pixel_to_world((int(x), int(y)))
            assert abs(math.hypot(wx, wy) - 1.0) <= RES

    def test_unit_scale_applied(self):
        # same geometry expressed in mm must give the same stroke length
        grid = rasterize(doc_of([Line((0.0, 0.0), (10000.0, 0.0)),
                                 Line((0.0, 3000.0), (10000.0, 3000.0))],
                                scale=0.001), RES)
        stroke = max(grid.cells.sum(axis=1))
        assert abs(stroke - (10.0 / RES + 1)) <= 1

    def test_border_ring_free_and_padded(self):
        grid = rasterize(doc_of([Line((0.0, 0.0), (1.0, 1.0))]), RES)
        assert not grid.cells[0, :].any() and not grid.cells[-1, :].any()
        assert not grid.cells[:, 0].any() and not grid.cells[:, -1].any()

    def test_determinism(self):
        doc = doc_of([Line((0.0, 0.0), (7.3, 2.1)), Circle((3.0, 1.0), 0.8)])
        a = rasterize(doc, RES)
        b = rasterize(doc, RES)
        assert np.array_equal(a.cells, b.cells)
        assert a.origin_world == b.origin_world


def _dilate_plus_oracle(occ):
    """Hand-rolled 1-px plus-shape dilation, independent of scipy."""
    out = occ.copy()
    out[1:, :] |= occ[:-1, :]
    out[:-1, :] |= occ[1:, :]
    out[:, 1:] |= occ[:, :-1]
    out[:, :-1] |= occ[:, 1:]
    return out


class TestThickenAndClose:
    def test_collinear_gap_bridged(self):
        cells = np.zeros((15, 40), bool)
        cells[6:9, 2:18] = True   # stroke A, wall-thick
        cells[6:9, 21:38] = True  # stroke B, 3-px gap
        grid = grid_of(cells)
        _, before = ndimage.label(grid.cells,
                                  structure=ndimage.generate_binary_structure(2, 2))
        assert before == 2
        closed = thicken_and_close(grid, 1, 2)
        _, count = ndimage.label(closed.cells,
                                 structure=ndimage.generate_binary_structure(2, 2))
        assert count == 1

    def test_thickness_one_no_bridge_is_plain_dilation(self):
        cells = np.zeros((15, 15), bool)
        cells[7, 3:12] = True
        grid = grid_of(cells)
        closed = thicken_and_close(grid, 1, 0)
        expected = _dilate_plus_oracle(cells)
        expected[0, :] = expected[-1, :] = False
        expected[:, 0] = expected[:, -1] = False
        assert np.array_equal(closed.cells, expected)

    def test_two_px_door_gap_with_unit_closing(self):
        # rectangle wall with a 2-px opening: radius-1 dilation already
        # seals a gap that narrow, leaving inside + outside separate
        cells = np.zeros((30, 30), bool)
        cells[5, 5:25] = True
        cells[24, 5:25] = True
        cells[5:25, 5] = True
        cells[5:25, 24] = True
        cells[5, 14:16] = False  # 2-px door gap
        closed = thicken_and_close(grid_of(cells), 1, 1)
        fs = free_space_components(closed)
        assert len(fs.interior_labels) == 1  # inside separate from outside

    def test_door_width_survives_default_closing(self):
        # 0.9 m door (18 px) between two rooms stays open at defaults
        cells = np.zeros((60, 120), bool)
        cells[5, 5:115] = True
        cells[54, 5:115] = True
        cells[5:55, 5] = True
        cells[5:55, 114] = True
        cells[5:55, 60] = True
        cells[21:39, 60] = False  # 18-px doorway
        closed = thicken_and_close(grid_of(cells), 3, 4)
        fs = free_space_components(closed)
        assert len(fs.interior_labels) == 1  # rooms connected through the door

    def test_free_space_never_gains_pixels(self):
        rng = np.random.default_rng(7)
        cells = rng.random((50, 50)) > 0.9
        cells[0, :] = cells[-1, :] = False
        cells[:, 0] = cells[:, -1] = False
        grid = grid_of(cells)
        closed = thicken_and_close(grid, 3, 2)
        # occupied only grows (apart from the enforced border ring)
        interior = np.zeros_like(cells)
        interior[1:-1, 1:-1] = True
        assert np.all(closed.cells[interior] >= cells[interior])


class TestFreeSpaceComponents:
    def test_closed_rectangle_one_interior(self):
        cells = np.zeros((20, 20), bool)
        cells[3, 3:17] = cells[16, 3:17] = True
        cells[3:17, 3] = cells[3:17, 16] = True
        fs = free_space_components(grid_of(cells))
        assert len(fs.interior_labels) == 1

    def test_two_sealed_rooms(self):
        cells = np.zeros((20, 36), bool)
        cells[3, 3:33] = cells[16, 3:33] = True
        cells[3:17, 3] = cells[3:17, 32] = True
        cells[3:17, 18] = True
        fs = free_space_components(grid_of(cells))
        assert len(fs.interior_labels) == 2

    def test_unsealed_scribble_raises(self):
        cells = np.zeros((20, 20), bool)
        cells[10, 4:9] = True
        cells[4:9, 12] = True
        with pytest.raises(NoInteriorSpace):
            free_space_components(grid_of(cells))


def test_pgm_debug_dump():
    cells = np.zeros((4, 6), bool)
    cells[1, 1] = True
    data = to_pgm(grid_of(cells))
    assert data.startswith(b"P5\n6 4\n255\n")
    assert len(data) == len(b"P5\n6 4\n255\n") + 24
