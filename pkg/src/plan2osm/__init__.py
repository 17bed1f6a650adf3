"""DXF floor plans to hierarchical topometric OSM maps."""

__version__ = "0.1.0"

from .areagraph import AreaGraph, Passage, RoomArea, SegmentationParams
from .config import PipelineConfig
from .ingest import CadDocument, LayerFilter, TextAnnotation, parse_dxf
from .osm import GeoOrigin, OsmMap, read_osm_xml, write_osm_xml
from .pipeline import convert, convert_bytes
from .raster import OccupancyGrid, rasterize, thicken_and_close

__all__ = [
    "AreaGraph", "CadDocument", "GeoOrigin", "LayerFilter", "OccupancyGrid",
    "OsmMap", "Passage", "PipelineConfig", "RoomArea", "SegmentationParams",
    "TextAnnotation", "convert", "convert_bytes", "parse_dxf", "rasterize",
    "read_osm_xml", "thicken_and_close", "write_osm_xml",
]
