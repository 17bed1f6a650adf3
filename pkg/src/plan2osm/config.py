"""Pipeline configuration: one auditable place for every parameter.

The file format is TOML with one section per pipeline stage. Unknown
sections or keys are rejected so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields as dataclass_fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .areagraph import SegmentationParams
from .errors import ConfigError
from .ingest import DEFAULT_INCLUDE_KEYWORDS, LayerFilter
from .osm import GeoOrigin
from .raster import RESOLUTION_RANGE
from .refine import RefineParams
from .semantics import ScoreParams

_SCHEMA: dict[str, tuple[str, ...]] = {
    "raster": ("resolution", "wall_thickness_px", "gap_bridge_px"),
    "segmentation": ("alpha", "prune_clearance", "door_max_width"),
    "refine": ("epsilon_simplify", "theta_spike", "a_min", "d_max_merge"),
    "semantics": ("rho_max", "d_max_px"),
    "layers": ("include_keywords", "exclude_keywords", "explicit_layers",
               "text_layers"),
    "geo": ("origin_lat", "origin_lon", "rotation", "level"),
    "eval": ("iou_threshold",),
    "fusion": ("stair_keywords",),
}


@dataclass
class PipelineConfig:
    # raster
    resolution: float = 0.05
    wall_thickness_px: int = 3
    gap_bridge_px: int = 4
    # segmentation
    alpha: float = 1.2
    prune_clearance: float = 0.25
    door_max_width: float = 2.5
    # refine
    epsilon_simplify: float = 0.10
    theta_spike: float = 15.0
    a_min: float = 1.0
    d_max_merge: float = 0.3
    # semantics
    rho_max: float = 0.7
    d_max_px: float = 50.0
    # layers
    include_keywords: tuple[str, ...] = DEFAULT_INCLUDE_KEYWORDS
    exclude_keywords: tuple[str, ...] = ()
    explicit_layers: tuple[str, ...] | None = None
    text_layers: tuple[str, ...] | None = None
    # geo
    origin_lat: float = 0.0
    origin_lon: float = 0.0
    rotation: float = 0.0
    level: int = 0
    # eval
    iou_threshold: float = 0.5
    # fusion
    stair_keywords: tuple[str, ...] = ("STAIR", "ELEV", "LIFT")

    def validate(self):
        """Range-check by constructing each stage's parameter object."""
        if not (RESOLUTION_RANGE[0] <= self.resolution <= RESOLUTION_RANGE[1]):
            raise ConfigError(f"raster.resolution outside {RESOLUTION_RANGE}")
        if self.wall_thickness_px < 1 or self.gap_bridge_px < 0:
            raise ConfigError("raster wall/gap pixel sizes out of range")
        try:
            self.segmentation_params()
            self.refine_params()
            self.score_params()
            self.layer_filter()
            self.origin()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 < self.iou_threshold <= 1:
            raise ConfigError("eval.iou_threshold must be in (0, 1]")
        return self

    # stage parameter objects -------------------------------------------------
    def segmentation_params(self) -> SegmentationParams:
        return SegmentationParams(alpha=self.alpha,
                                  prune_clearance=self.prune_clearance,
                                  door_max_width=self.door_max_width)

    def refine_params(self) -> RefineParams:
        return RefineParams(epsilon_simplify=self.epsilon_simplify,
                            theta_spike=self.theta_spike,
                            a_min=self.a_min, d_max_merge=self.d_max_merge)

    def score_params(self) -> ScoreParams:
        return ScoreParams(rho_max=self.rho_max, d_max=self.d_max_px)

    def layer_filter(self) -> LayerFilter:
        return LayerFilter(include_keywords=tuple(self.include_keywords),
                           exclude_keywords=tuple(self.exclude_keywords),
                           explicit_layers=None if self.explicit_layers is None
                           else tuple(self.explicit_layers),
                           text_layers=None if self.text_layers is None
                           else tuple(self.text_layers))

    def origin(self) -> GeoOrigin:
        return GeoOrigin(self.origin_lat, self.origin_lon, self.rotation)

    # (de)serialization -------------------------------------------------------
    _SECTION_OF = {name: section for section, names in _SCHEMA.items()
                   for name in names}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        cfg = cls()
        known_fields = {f.name for f in dataclass_fields(cls)}
        for section, values in data.items():
            if section not in _SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            if not isinstance(values, dict):
                raise ConfigError(f"section [{section}] must be a table")
            for key, value in values.items():
                name = _key_to_field(section, key)
                if name is None or name not in known_fields:
                    raise ConfigError(f"unknown config key {section}.{key}")
                if isinstance(value, list):
                    value = tuple(value)
                # TOML has no null: an empty list means "unset" for the
                # optional layer lists
                if name in ("explicit_layers", "text_layers") and value == ():
                    value = None
                setattr(cfg, name, value)
        return cfg.validate()

    @classmethod
    def from_toml(cls, text: str | bytes) -> "PipelineConfig":
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        with open(path, "rb") as fh:
            return cls.from_toml(fh.read())

    def to_toml(self) -> str:
        lines = []
        for section, names in _SCHEMA.items():
            lines.append(f"[{section}]")
            for key in names:
                value = getattr(self, _key_to_field(section, key))
                lines.append(f"{key} = {_toml_value(value)}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        out: dict[str, dict] = {}
        for section, names in _SCHEMA.items():
            out[section] = {}
            for key in names:
                value = getattr(self, _key_to_field(section, key))
                out[section][key] = list(value) if isinstance(value, tuple) else value
        return out


def _key_to_field(section: str, key: str) -> str | None:
    if key not in _SCHEMA.get(section, ()):
        return None
    return key


def _toml_value(value) -> str:
    if value is None:
        return "[]  # unset"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")
