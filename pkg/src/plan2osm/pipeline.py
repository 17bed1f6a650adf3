"""End-to-end conversion: DXF bytes in, geo-referenced OSM map out.

Deterministic given (file bytes, config); every stage contributes its
counts, warnings and wall time to the conversion report.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from . import semantics
from .areagraph import AreaGraph, segment_grid
from .config import PipelineConfig
from .ingest import extract_text, filter_layers, parse_dxf
from .osm import OsmMap, serialize_area_graph
from .raster import free_space_components, rasterize, thicken_and_close
from .refine import refine_graph


@dataclass
class ConversionReport:
    dropped_layers: list[str] = field(default_factory=list)
    layer_entity_counts: dict[str, int] = field(default_factory=dict)
    unsupported_entities: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    interior_components: int = 0
    rooms_raw: int = 0
    passages_raw: int = 0
    rooms_refined: int = 0
    passages_refined: int = 0
    texts_found: int = 0
    texts_assigned: int = 0
    unassigned_texts: list[dict] = field(default_factory=list)
    stage_seconds: dict[str, float] = field(default_factory=dict)
    total_seconds: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "dropped_layers": self.dropped_layers,
            "layer_entity_counts": self.layer_entity_counts,
            "unsupported_entities": self.unsupported_entities,
            "warnings": self.warnings,
            "interior_components": self.interior_components,
            "rooms_raw": self.rooms_raw,
            "passages_raw": self.passages_raw,
            "rooms_refined": self.rooms_refined,
            "passages_refined": self.passages_refined,
            "texts_found": self.texts_found,
            "texts_assigned": self.texts_assigned,
            "unassigned_texts": self.unassigned_texts,
        }
        if include_timing:
            out["stage_seconds"] = self.stage_seconds
            out["total_seconds"] = self.total_seconds
        return out


class _Stopwatch:
    def __init__(self, report: ConversionReport):
        self.report = report
        self.started = time.perf_counter()

    def lap(self, stage: str, t0: float) -> float:
        now = time.perf_counter()
        self.report.stage_seconds[stage] = now - t0
        return now

    def finish(self):
        self.report.total_seconds = time.perf_counter() - self.started


def build_graph(data: bytes, config: PipelineConfig,
                report: ConversionReport | None = None,
                intermediates: dict | None = None) -> tuple[AreaGraph, ConversionReport]:
    """Run ingest through semantics; the graph is ready for serialization.

    Pass a dict as ``intermediates`` to receive the closed grid, the
    segmentation and the skeleton for debug rendering.
    """
    report = report if report is not None else ConversionReport()
    watch = _Stopwatch(report)
    t = watch.started

    doc = parse_dxf(data)
    report.unsupported_entities = dict(doc.unsupported)
    report.warnings.extend(doc.warnings)
    report.layer_entity_counts = doc.layer_entity_counts()
    t = watch.lap("parse", t)

    layer_filter = config.layer_filter()
    filtered = filter_layers(doc, layer_filter)
    report.dropped_layers = filtered.dropped_layers
    texts = extract_text(doc, layer_filter)
    report.texts_found = len(texts)
    t = watch.lap("filter", t)

    grid = rasterize(filtered.document, config.resolution)
    closed = thicken_and_close(grid, config.wall_thickness_px, config.gap_bridge_px)
    report.interior_components = len(free_space_components(closed).interior_labels)
    t = watch.lap("rasterize", t)

    graph, seg, skel = segment_grid(closed, config.segmentation_params())
    report.rooms_raw = len(graph.rooms)
    report.passages_raw = len(graph.passages)
    if intermediates is not None:
        intermediates.update(grid=closed, segmentation=seg, skeleton=skel)
    t = watch.lap("segment", t)

    graph, _ = refine_graph(graph, config.refine_params())
    report.rooms_refined = len(graph.rooms)
    report.passages_refined = len(graph.passages)
    t = watch.lap("refine", t)

    texts_px = semantics.texts_in_pixel_frame(texts, doc.drawing_unit_scale, graph)
    rooms_px = semantics.rooms_in_pixel_frame(graph)
    assoc = semantics.associate_texts(texts_px, rooms_px, config.score_params())
    semantics.apply_assignments(graph, assoc)
    report.texts_assigned = len(assoc.assignments)
    report.unassigned_texts = [
        {"content": a.content, "position": list(a.position), "layer": a.source_layer}
        for a in assoc.unassigned
    ]
    watch.lap("semantics", t)
    watch.finish()
    return graph, report


def convert_bytes(data: bytes, config: PipelineConfig,
                  intermediates: dict | None = None) -> tuple[OsmMap, ConversionReport]:
    graph, report = build_graph(data, config, intermediates=intermediates)
    t0 = time.perf_counter()
    osm = serialize_area_graph(graph, config.origin(), config.level)
    report.stage_seconds["serialize"] = time.perf_counter() - t0
    report.total_seconds += report.stage_seconds["serialize"]
    return osm, report


def convert(path: str, config: PipelineConfig) -> tuple[OsmMap, ConversionReport]:
    with open(path, "rb") as fh:
        data = fh.read()
    return convert_bytes(data, config)
