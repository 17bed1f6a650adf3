"""Local HTTP service exposing the pipeline to the review UI.

Uploads are keyed by content hash and kept in a session directory, so a
restarted service can re-parse them; segmentation state lives in memory
and is rebuilt by the client re-segmenting.
"""

from __future__ import annotations

import base64
import hashlib
import os
import tempfile
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel

from . import semantics
from .areagraph import AreaGraph, Segmentation, segment_grid
from .config import PipelineConfig
from .errors import (ConfigError, DegenerateExtents, EmptyDocument,
                     NoInteriorSpace, NoStructuralLayers, ParseError,
                     UnsupportedLatitude)
from .ingest import CadDocument, extract_text, filter_layers, parse_dxf
from .osm import GeoOrigin, serialize_area_graph, write_osm_xml
from .raster import OccupancyGrid, rasterize, thicken_and_close
from .refine import merge_rooms_interactive, refine_graph
from .render import render_segmentation_png


@dataclass
class DocumentSession:
    doc_id: str
    document: CadDocument
    raw_path: str
    graph: AreaGraph | None = None
    seg: Segmentation | None = None
    grid: OccupancyGrid | None = None
    config: PipelineConfig = field(default_factory=PipelineConfig)


class SegmentRequest(BaseModel):
    config: dict = {}


class MergeRequest(BaseModel):
    room_ids: list[int]


class OriginModel(BaseModel):
    lat: float
    lon: float
    rotation: float = 0.0


class ExportRequest(BaseModel):
    origin: OriginModel
    level: int = 0


def _graph_payload(session: DocumentSession) -> dict:
    graph = session.graph
    rooms = [{
        "id": room.id,
        "name": room.tags.get("name"),
        "area_m2": room.area_m2,
        "polygon": [[x, y] for x, y in room.polygon],
    } for room in graph.rooms]
    passages = [{
        "id": p.id,
        "room_a": p.room_a,
        "room_b": p.room_b,
        "endpoints": [[p.endpoints[0][0], p.endpoints[0][1]],
                      [p.endpoints[1][0], p.endpoints[1][1]]],
    } for p in graph.passages]
    png = render_segmentation_png(session.grid, session.seg)
    return {
        "document": session.doc_id,
        "rooms": rooms,
        "passages": passages,
        "render_png_base64": base64.b64encode(png).decode("ascii"),
    }


def create_app(session_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="plan2osm review service", version="0.1.0")
    app.state.session_dir = session_dir or os.path.join(
        tempfile.gettempdir(), "plan2osm-sessions")
    os.makedirs(app.state.session_dir, exist_ok=True)
    sessions: dict[str, DocumentSession] = {}

    def get_session(doc_id: str) -> DocumentSession:
        session = sessions.get(doc_id)
        if session is None:
            path = os.path.join(app.state.session_dir, f"{doc_id}.dxf")
            if not os.path.exists(path):
                raise HTTPException(404, f"unknown document {doc_id}")
            with open(path, "rb") as fh:
                document = parse_dxf(fh.read())
            session = DocumentSession(doc_id, document, path)
            sessions[doc_id] = session
        return session

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/documents")
    async def upload(request: Request):
        data = await request.body()
        if not data:
            raise HTTPException(400, "empty upload")
        try:
            document = parse_dxf(data)
        except (ParseError, EmptyDocument) as exc:
            raise HTTPException(422, f"{type(exc).__name__}: {exc}")
        doc_id = hashlib.sha1(data).hexdigest()[:12]
        path = os.path.join(app.state.session_dir, f"{doc_id}.dxf")
        with open(path, "wb") as fh:
            fh.write(data)
        sessions[doc_id] = DocumentSession(doc_id, document, path)
        default_filter = PipelineConfig().layer_filter()
        layers = [{
            "name": name,
            "entities": count,
            "keyword_match": default_filter.matches(name),
        } for name, count in document.layer_entity_counts().items()]
        return {"id": doc_id, "layers": layers, "warnings": document.warnings}

    @app.post("/documents/{doc_id}/segment")
    def segment(doc_id: str, body: SegmentRequest):
        session = get_session(doc_id)
        try:
            config = PipelineConfig.from_dict(body.config) if body.config \
                else PipelineConfig()
        except ConfigError as exc:
            raise HTTPException(400, str(exc))
        try:
            filtered = filter_layers(session.document, config.layer_filter())
            grid = rasterize(filtered.document, config.resolution)
            closed = thicken_and_close(grid, config.wall_thickness_px,
                                       config.gap_bridge_px)
            graph, seg, _ = segment_grid(closed, config.segmentation_params())
            graph, _ = refine_graph(graph, config.refine_params())
            texts = extract_text(session.document, config.layer_filter())
            texts_px = semantics.texts_in_pixel_frame(
                texts, session.document.drawing_unit_scale, graph)
            assoc = semantics.associate_texts(texts_px,
                                              semantics.rooms_in_pixel_frame(graph),
                                              config.score_params())
            semantics.apply_assignments(graph, assoc)
        except NoStructuralLayers as exc:
            raise HTTPException(422, f"NoStructuralLayers: {exc}")
        except (DegenerateExtents, NoInteriorSpace) as exc:
            raise HTTPException(422, f"{type(exc).__name__}: {exc}")
        session.graph = graph
        session.seg = seg
        session.grid = closed
        session.config = config
        return _graph_payload(session)

    @app.post("/documents/{doc_id}/merge-rooms")
    def merge_rooms(doc_id: str, body: MergeRequest):
        session = get_session(doc_id)
        if session.graph is None:
            raise HTTPException(409, "segment the document first")
        try:
            merge_rooms_interactive(session.graph, body.room_ids)
        except (ValueError, KeyError) as exc:
            raise HTTPException(400, str(exc))
        # keep the raster view in sync: merged regions take the survivor id
        survivor = {r.id for r in session.graph.rooms} & set(body.room_ids)
        if survivor and session.seg is not None:
            keep = survivor.pop()
            import numpy as np
            gone = [rid for rid in body.room_ids if rid != keep]
            session.seg.labels[np.isin(session.seg.labels, gone)] = keep
            session.seg.region_ids = [r for r in session.seg.region_ids
                                      if r not in gone]
        return _graph_payload(session)

    @app.post("/documents/{doc_id}/export")
    def export(doc_id: str, body: ExportRequest):
        session = get_session(doc_id)
        if session.graph is None:
            raise HTTPException(409, "segment the document first")
        try:
            origin = GeoOrigin(body.origin.lat, body.origin.lon, body.origin.rotation)
            osm = serialize_area_graph(session.graph, origin, body.level)
        except (ValueError, UnsupportedLatitude) as exc:
            raise HTTPException(400, str(exc))
        return Response(content=write_osm_xml(osm), media_type="application/xml")

    return app
