"""Debug renderings: region maps as indexed-color PNG with overlays."""

from __future__ import annotations

import colorsys
import io

import numpy as np
from PIL import Image

from .areagraph import Segmentation, VoronoiSkeleton
from .raster import OccupancyGrid


def _palette(count: int) -> list[tuple[int, int, int]]:
    colors = []
    for k in range(count):
        hue = (k * 0.6180339887) % 1.0  # golden-ratio spacing
        r, g, b = colorsys.hsv_to_rgb(hue, 0.55, 0.95)
        colors.append((int(r * 255), int(g * 255), int(b * 255)))
    return colors


def render_segmentation_png(grid: OccupancyGrid, seg: Segmentation,
                            skeleton: VoronoiSkeleton | None = None) -> bytes:
    """Regions in distinct colors, structure black, exterior white,
    door chords red, skeleton dark overlay. Rows flipped for display."""
    h, w = seg.labels.shape
    img = np.full((h, w, 3), 255, dtype=np.uint8)
    colors = _palette(max(seg.region_ids, default=0) + 1)
    for rid in seg.region_ids:
        img[seg.labels == rid] = colors[rid % len(colors)]
    img[grid.cells] = (30, 30, 30)
    if skeleton is not None and len(skeleton):
        xs = skeleton.points[:, 0]
        ys = skeleton.points[:, 1]
        img[ys, xs] = (90, 90, 90)
    for chord in seg.chords:
        for (x0, y0), (x1, y1) in ((chord.a_px, chord.b_px),):
            n = max(abs(x1 - x0), abs(y1 - y0)) + 1
            for t in range(n):
                x = round(x0 + (x1 - x0) * t / max(n - 1, 1))
                y = round(y0 + (y1 - y0) * t / max(n - 1, 1))
                if 0 <= x < w and 0 <= y < h:
                    img[y, x] = (220, 40, 40)
    out = io.BytesIO()
    Image.fromarray(img[::-1, :, :]).save(out, format="PNG")
    return out.getvalue()
