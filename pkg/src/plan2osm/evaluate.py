"""Quantitative comparison of generated maps against ground truth.

Rooms are matched one-to-one by polygon IoU (greedy, best first, pairs
below the threshold rejected). Passages are matched through the room
matching plus a midpoint distance gate. Metrics are micro-averaged when
pooling a corpus.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass, field

from shapely.geometry import Polygon as ShapelyPolygon

from .errors import ConfigError
from .osm import GeoOrigin, OsmMap, latlon_to_cartesian

DEFAULT_IOU_THRESHOLD = 0.5
PASSAGE_MIDPOINT_TOLERANCE_M = 1.0


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self):
        total = self.tp + self.fp
        return self.tp / total if total else None

    @property
    def recall(self):
        total = self.tp + self.fn
        return self.tp / total if total else None

    @property
    def f1(self):
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class MetricsReport:
    rooms: Counts = field(default_factory=Counts)
    passages: Counts = field(default_factory=Counts)
    semantic_accuracy: float | None = None
    semantic_correct: int = 0
    semantic_total: int = 0
    processing_time_s: float = 0.0

    def to_dict(self):
        return {
            "rooms": self.rooms.to_dict(),
            "passages": self.passages.to_dict(),
            "semantic_accuracy": self.semantic_accuracy,
            "semantic_correct": self.semantic_correct,
            "semantic_total": self.semantic_total,
            "processing_time_s": self.processing_time_s,
        }


@dataclass
class RoomMatching:
    pairs: list[tuple[int, int, float]]  # (pred way id, gt way id, iou)
    counts: Counts
    pred_to_gt: dict[int, int]


def _eval_origin(gt: OsmMap) -> GeoOrigin:
    bounds = gt.bounds or gt.compute_bounds()
    if bounds is None:
        raise ConfigError("ground truth map has no nodes")
    return GeoOrigin((bounds[0] + bounds[2]) / 2, (bounds[1] + bounds[3]) / 2)


def _room_shapes(osm: OsmMap, origin: GeoOrigin) -> dict[int, ShapelyPolygon]:
    shapes = {}
    for way in osm.area_ways(("room", "corridor")):
        pts = [latlon_to_cartesian(lat, lon, origin)
               for lat, lon in osm.way_polygon_latlon(way)]
        if len(pts) >= 3:
            poly = ShapelyPolygon(pts)
            if not poly.is_valid:
                poly = poly.buffer(0)
            if poly.area > 0:
                shapes[way.id] = poly
    return shapes


def match_rooms(pred: OsmMap, gt: OsmMap,
                iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> RoomMatching:
    """Greedy one-to-one matching by descending IoU.

    Unmatched predictions are false positives (over-segmentation),
    unmatched ground-truth rooms are false negatives (merged rooms).
    """
    origin = _eval_origin(gt)
    pred_shapes = _room_shapes(pred, origin)
    gt_shapes = _room_shapes(gt, origin)

    candidates = []
    for pid, pshape in pred_shapes.items():
        for gid, gshape in gt_shapes.items():
            inter = pshape.intersection(gshape).area
            if inter <= 0:
                continue
            iou = inter / pshape.union(gshape).area
            if iou >= iou_threshold:
                candidates.append((-iou, pid, gid))
    candidates.sort()

    used_pred: set[int] = set()
    used_gt: set[int] = set()
    pairs = []
    for neg_iou, pid, gid in candidates:
        if pid in used_pred or gid in used_gt:
            continue
        used_pred.add(pid)
        used_gt.add(gid)
        pairs.append((pid, gid, -neg_iou))

    counts = Counts(tp=len(pairs),
                    fp=len(pred_shapes) - len(pairs),
                    fn=len(gt_shapes) - len(pairs))
    return RoomMatching(pairs=pairs, counts=counts,
                        pred_to_gt={p: g for p, g, _ in pairs})


def _passage_records(osm: OsmMap, origin: GeoOrigin):
    """(way, room pair as way ids, midpoint in meters) per horizontal passage."""
    rooms = osm.area_ways(("room", "corridor"))
    label_to_id: dict[str, int] = {}
    for way in rooms:
        label_to_id[str(way.id)] = way.id
        name = way.tag("name")
        if name is not None:
            label_to_id.setdefault(name, way.id)
    nodes = osm.node_index()
    records = []
    for way in osm.passage_ways():
        level = way.tag("level", "")
        if ";" in level:
            continue  # vertical passages are out of scope here
        a = label_to_id.get(way.tag("osmAG:from", ""))
        b = label_to_id.get(way.tag("osmAG:to", ""))
        if a is None or b is None or len(way.node_refs) != 2:
            continue
        p1 = latlon_to_cartesian(nodes[way.node_refs[0]].lat,
                                 nodes[way.node_refs[0]].lon, origin)
        p2 = latlon_to_cartesian(nodes[way.node_refs[1]].lat,
                                 nodes[way.node_refs[1]].lon, origin)
        midpoint = ((p1[0] + p2[0]) / 2, (p1[1] + p2[1]) / 2)
        records.append((way, frozenset((a, b)), midpoint))
    return records


def match_passages(pred: OsmMap, gt: OsmMap, room_matching: RoomMatching) -> Counts:
    """A predicted passage is correct when its room pair maps onto a
    ground-truth passage's pair and the midpoints agree within 1 m."""
    origin = _eval_origin(gt)
    pred_records = _passage_records(pred, origin)
    gt_records = _passage_records(gt, origin)

    candidates = []
    for i, (pway, prooms, pmid) in enumerate(pred_records):
        mapped = frozenset(room_matching.pred_to_gt.get(r, -10 ** 9) for r in prooms)
        for j, (gway, grooms, gmid) in enumerate(gt_records):
            if mapped != grooms:
                continue
            dist = math.dist(pmid, gmid)
            if dist <= PASSAGE_MIDPOINT_TOLERANCE_M:
                candidates.append((dist, i, j))
    candidates.sort()

    used_pred: set[int] = set()
    used_gt: set[int] = set()
    tp = 0
    for _, i, j in candidates:
        if i in used_pred or j in used_gt:
            continue
        used_pred.add(i)
        used_gt.add(j)
        tp += 1
    return Counts(tp=tp, fp=len(pred_records) - tp, fn=len(gt_records) - tp)


_WHITESPACE = re.compile(r"\s+")


def _normalize_name(name: str) -> str:
    return _WHITESPACE.sub(" ", name.strip()).casefold()


def semantic_accuracy(pred: OsmMap, gt: OsmMap,
                      room_matching: RoomMatching) -> tuple[float | None, int, int]:
    """Fraction of labeled ground-truth rooms whose matched prediction
    carries the same name (case-folded, whitespace collapsed). Unmatched
    labeled rooms count as incorrect."""
    gt_to_pred = {g: p for p, g in room_matching.pred_to_gt.items()}
    pred_ways = pred.way_index()
    correct = 0
    total = 0
    for way in gt.area_ways(("room", "corridor")):
        gt_name = way.tag("name")
        if gt_name is None:
            continue
        total += 1
        pred_id = gt_to_pred.get(way.id)
        if pred_id is None:
            continue
        pred_name = pred_ways[pred_id].tag("name")
        if pred_name is not None and _normalize_name(pred_name) == _normalize_name(gt_name):
            correct += 1
    if total == 0:
        return None, 0, 0
    return correct / total, correct, total


def evaluate_maps(pred: OsmMap, gt: OsmMap,
                  iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                  processing_time_s: float = 0.0) -> MetricsReport:
    rooms = match_rooms(pred, gt, iou_threshold)
    passages = match_passages(pred, gt, rooms)
    accuracy, correct, total = semantic_accuracy(pred, gt, rooms)
    return MetricsReport(rooms=rooms.counts, passages=passages,
                         semantic_accuracy=accuracy,
                         semantic_correct=correct, semantic_total=total,
                         processing_time_s=processing_time_s)


# --------------------------------------------------------------------------
# corpus benchmark
# --------------------------------------------------------------------------

@dataclass
class BenchmarkResult:
    per_file: dict[str, MetricsReport]
    pooled: MetricsReport

    def to_dict(self):
        return {"per_file": {k: v.to_dict() for k, v in self.per_file.items()},
                "pooled": self.pooled.to_dict()}

    def markdown_table(self) -> str:
        def pct(v):
            return "n/a" if v is None else f"{100 * v:.2f}%"

        rows = [
            "| Element Type | GT | Precision | Recall | F1-Score |",
            "|---|---|---|---|---|",
        ]
        pooled = self.pooled
        rows.append(f"| Rooms | {pooled.rooms.tp + pooled.rooms.fn} | "
                    f"{pct(pooled.rooms.precision)} | {pct(pooled.rooms.recall)} | "
                    f"{pct(pooled.rooms.f1)} |")
        rows.append(f"| Passages | {pooled.passages.tp + pooled.passages.fn} | "
                    f"{pct(pooled.passages.precision)} | {pct(pooled.passages.recall)} | "
                    f"{pct(pooled.passages.f1)} |")
        rows.append("")
        rows.append(f"Semantic accuracy: {pct(pooled.semantic_accuracy)} "
                    f"({pooled.semantic_correct}/{pooled.semantic_total})")
        rows.append(f"Average processing time: {pooled.processing_time_s:.2f} s per plan")
        return "\n".join(rows)


def pool_reports(reports: list[MetricsReport]) -> MetricsReport:
    """Micro-average: pool by summing TP/FP/FN over the corpus."""
    pooled = MetricsReport()
    for r in reports:
        pooled.rooms.tp += r.rooms.tp
        pooled.rooms.fp += r.rooms.fp
        pooled.rooms.fn += r.rooms.fn
        pooled.passages.tp += r.passages.tp
        pooled.passages.fp += r.passages.fp
        pooled.passages.fn += r.passages.fn
        pooled.semantic_correct += r.semantic_correct
        pooled.semantic_total += r.semantic_total
    if pooled.semantic_total:
        pooled.semantic_accuracy = pooled.semantic_correct / pooled.semantic_total
    if reports:
        pooled.processing_time_s = sum(r.processing_time_s for r in reports) / len(reports)
    return pooled


def run_benchmark(entries: list[dict], converter,
                  iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> BenchmarkResult:
    """Convert and score each manifest entry: {dxf, gt_osm, config?}.

    ``converter(dxf_path, config_dict_or_none)`` must return the
    predicted OsmMap. Wall time per file is recorded.
    """
    if not entries:
        raise ConfigError("benchmark manifest is empty")
    from .osm import read_osm_xml

    per_file: dict[str, MetricsReport] = {}
    for entry in entries:
        if "dxf" not in entry or "gt_osm" not in entry:
            raise ConfigError(f"manifest entry needs dxf and gt_osm: {entry}")
        started = time.perf_counter()
        pred = converter(entry["dxf"], entry.get("config"))
        elapsed = time.perf_counter() - started
        with open(entry["gt_osm"], "rb") as fh:
            gt = read_osm_xml(fh.read())
        per_file[entry["dxf"]] = evaluate_maps(pred, gt, iou_threshold, elapsed)
    return BenchmarkResult(per_file=per_file, pooled=pool_reports(list(per_file.values())))


def load_manifest(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ConfigError("manifest must be a JSON array")
    return data
