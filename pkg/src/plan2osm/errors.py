"""Typed errors shared across the pipeline, grouped by stage."""


class Plan2OsmError(Exception):
    """Base class for all pipeline errors."""


# --- DXF ingest ---

class ParseError(Plan2OsmError):
    """Malformed DXF group-code structure.

    Carries the byte offset of the offending line so the file can be
    inspected with a hex editor.
    """

    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class EmptyDocument(Plan2OsmError):
    """DXF contained no entities at all."""


class NoStructuralLayers(Plan2OsmError):
    """Layer filtering dropped everything; manual layer selection needed."""


# --- rasterizer ---

class InvalidResolution(Plan2OsmError):
    """Resolution outside the supported [0.005, 0.2] m/px range."""


class DegenerateExtents(Plan2OsmError):
    """Document extents have zero area (or no structural entities)."""


class NoInteriorSpace(Plan2OsmError):
    """No enclosed free-space component; the plan is not watertight."""


# --- area graph ---

class SegmentationBug(Plan2OsmError):
    """Internal invariant of the segmentation violated (assertion-grade)."""


# --- osm model ---

class UnsupportedLatitude(Plan2OsmError):
    """Origin too close to a pole for the local tangent-plane projection."""


class SerializationRefused(Plan2OsmError):
    """AreaGraph invariants do not hold; refusing to emit OSM."""


class OsmReadError(Plan2OsmError):
    """Base for OSM XML reader failures."""


class MalformedXml(OsmReadError):
    pass


class DanglingReference(OsmReadError):
    """A way references a node id that is not in the document."""


class MixedIdSigns(OsmReadError):
    """Positive ids mixed with negative ids in one document."""


# --- semantic association ---

class WrongCase(Plan2OsmError):
    """Score function called outside its geometric precondition."""


# --- floor fusion ---

class OriginMismatch(Plan2OsmError):
    """Floors to fuse do not share one geographic origin."""


class DuplicateLevel(Plan2OsmError):
    """Two floors claim the same level index."""


# --- configuration / manifests ---

class ConfigError(Plan2OsmError):
    """Bad configuration value, unknown key, or malformed manifest."""
