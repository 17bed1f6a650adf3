"""Command-line entry point: convert, merge, eval, serve, config.

Exit codes: 0 ok, 1 internal error, 2 input/filter problem, 3 bad
configuration or manifest.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import evaluate, fusion, pipeline
from .config import PipelineConfig
from .errors import (ConfigError, DegenerateExtents, DuplicateLevel,
                     EmptyDocument, InvalidResolution, NoInteriorSpace,
                     NoStructuralLayers, OriginMismatch, ParseError,
                     Plan2OsmError)
from .osm import read_osm_xml, write_osm_xml

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_CONFIG = 3

_INPUT_ERRORS = (ParseError, EmptyDocument, NoStructuralLayers,
                 NoInteriorSpace, DegenerateExtents)
_CONFIG_ERRORS = (ConfigError, InvalidResolution, OriginMismatch, DuplicateLevel)

log = logging.getLogger("plan2osm")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {
        "resolution": getattr(args, "resolution", None),
        "origin_lat": getattr(args, "origin_lat", None),
        "origin_lon": getattr(args, "origin_lon", None),
        "level": getattr(args, "level", None),
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    layers = getattr(args, "layers", None)
    if layers:
        cfg.explicit_layers = tuple(layers.split(","))
    for item in getattr(args, "set", None) or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        data = cfg.to_dict()
        if section not in data or key not in data[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        data[section][key] = value
        cfg = PipelineConfig.from_dict(data)
    return cfg.validate()


def _cmd_convert(args) -> int:
    cfg = _load_config(args)
    intermediates: dict | None = {} if args.debug_dir else None
    with open(args.dxf, "rb") as fh:
        data = fh.read()
    osm, report = pipeline.convert_bytes(data, cfg, intermediates=intermediates)
    out = args.output or os.path.splitext(args.dxf)[0] + ".osm"
    with open(out, "wb") as fh:
        fh.write(write_osm_xml(osm))
    if args.debug_dir:
        from .raster import to_pgm
        from .render import render_segmentation_png
        os.makedirs(args.debug_dir, exist_ok=True)
        grid = intermediates["grid"]
        with open(os.path.join(args.debug_dir, "grid.pgm"), "wb") as fh:
            fh.write(to_pgm(grid))
        with open(os.path.join(args.debug_dir, "regions.png"), "wb") as fh:
            fh.write(render_segmentation_png(grid, intermediates["segmentation"],
                                             intermediates["skeleton"]))
        kept = {name: count
                for name, count in report.layer_entity_counts.items()
                if name not in report.dropped_layers}
        with open(os.path.join(args.debug_dir, "layers.json"), "w",
                  encoding="utf-8") as fh:
            json.dump({"kept": kept, "dropped": report.dropped_layers},
                      fh, indent=2)
    report_path = args.report or out + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    print(f"wrote {out} ({report.rooms_refined} rooms, "
          f"{report.passages_refined} passages, "
          f"{report.texts_assigned}/{report.texts_found} texts assigned)")
    return EXIT_OK


def _cmd_merge(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        entries = json.load(fh)
    if not isinstance(entries, list) or not entries:
        raise ConfigError("fusion manifest must be a non-empty JSON array")
    floors = []
    for entry in entries:
        if "file" not in entry or "level" not in entry:
            raise ConfigError(f"manifest entry needs file and level: {entry}")
        with open(entry["file"], "rb") as fh:
            osm = read_osm_xml(fh.read())
        if "origin" in entry:
            from .osm import GeoOrigin
            o = entry["origin"]
            osm.origin = GeoOrigin(o["lat"], o["lon"], o.get("rotation", 0.0))
        floors.append(fusion.FloorSpec(map=osm, level=int(entry["level"]),
                                       elevation_m=float(entry.get("elevation", 0.0))))
    fused = fusion.fuse_floors(floors)
    violations = fusion.validate_hierarchy(fused)
    with open(args.output, "wb") as fh:
        fh.write(write_osm_xml(fused))
    print(f"wrote {args.output} ({len(fused.ways)} ways, "
          f"{len(violations)} hierarchy violations)")
    for v in violations:
        print(f"  violation: {v}", file=sys.stderr)
    return EXIT_OK if not violations else EXIT_INTERNAL


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    entries = evaluate.load_manifest(args.manifest)

    def converter(dxf_path, entry_config):
        file_cfg = PipelineConfig.from_dict(entry_config) if entry_config else cfg
        osm, _ = pipeline.convert(dxf_path, file_cfg)
        return osm

    result = evaluate.run_benchmark(entries, converter, cfg.iou_threshold)
    out = args.output or "eval-report.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    markdown = result.markdown_table()
    if args.markdown:
        with open(args.markdown, "w", encoding="utf-8") as fh:
            fh.write(markdown + "\n")
    print(markdown)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    session_dir = args.session_dir or os.environ.get("PLAN2OSM_SESSION_DIR")
    app = create_app(session_dir=session_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _cmd_config(args) -> int:
    if args.print_defaults:
        print(PipelineConfig().to_toml())
        return EXIT_OK
    if args.check:
        PipelineConfig.from_file(args.check)
        print(f"{args.check}: ok")
        return EXIT_OK
    print("nothing to do; see --print-defaults / --check", file=sys.stderr)
    return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plan2osm",
        description="Convert architectural DXF floor plans into hierarchical "
                    "topometric OSM maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config value (repeatable)")

    p = sub.add_parser("convert", help="DXF -> OSM conversion")
    p.add_argument("dxf")
    p.add_argument("-o", "--output", help="output .osm path")
    p.add_argument("--report", help="conversion report JSON path")
    p.add_argument("--resolution", type=float)
    p.add_argument("--origin-lat", type=float, dest="origin_lat")
    p.add_argument("--origin-lon", type=float, dest="origin_lon")
    p.add_argument("--level", type=int)
    p.add_argument("--layers", help="comma-separated explicit structural layers")
    p.add_argument("--debug-dir", dest="debug_dir",
                   help="write grid.pgm, regions.png and layers.json here")
    add_config_flags(p)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("merge", help="fuse per-floor .osm files")
    p.add_argument("manifest", help="JSON: [{file, level, elevation?}]")
    p.add_argument("-o", "--output", required=True)
    add_config_flags(p)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("eval", help="score conversions against ground truth")
    p.add_argument("manifest", help="JSON: [{dxf, gt_osm, config?}]")
    p.add_argument("-o", "--output", help="report JSON path")
    p.add_argument("--markdown", help="also write a markdown table")
    add_config_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="run the local review service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--session-dir", help="defaults to $PLAN2OSM_SESSION_DIR")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("config", help="configuration helpers")
    p.add_argument("--print-defaults", action="store_true")
    p.add_argument("--check", help="validate a config file")
    p.set_defaults(func=_cmd_config)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Plan2OsmError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
