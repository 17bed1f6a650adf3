import logging

import pytest

from plan2osm import fixtures
from plan2osm.config import PipelineConfig
from plan2osm.errors import ConfigError, DuplicateLevel, OriginMismatch
from plan2osm.fusion import (FloorSpec, fuse_floors, room_graph_connected,
                             validate_hierarchy)
from plan2osm.osm import GeoOrigin, read_osm_xml, validate_osmag, write_osm_xml
from plan2osm.pipeline import convert_bytes

ORIGIN_KW = dict(origin_lat=31.0, origin_lon=121.0)


def floor_map(level, dxf=None):
    cfg = PipelineConfig(level=level, **ORIGIN_KW).validate()
    osm, _ = convert_bytes(dxf or fixtures.stair_floor_dxf(level), cfg)
    return osm


@pytest.fixture(scope="module")
def fused():
    return fuse_floors([FloorSpec(floor_map(0), 0, elevation_m=0.0),
                        FloorSpec(floor_map(1), 1, elevation_m=3.2)])


class TestFuseFloors:
    def test_single_building_root(self, fused):
        structures = [w for w in fused.ways if w.tag("osmAG:type") == "structure"]
        assert len(structures) == 1
        assert structures[0].tag("building") == "yes"
        assert structures[0].is_closed()

    def test_one_floor_area_per_level(self, fused):
        floors = [w for w in fused.ways if w.tag("indoor") == "level"]
        assert sorted(w.tag("level") for w in floors) == ["0", "1"]
        building_id = str(next(w.id for w in fused.ways
                               if w.tag("osmAG:type") == "structure"))
        assert all(w.tag("osmAG:parent") == building_id for w in floors)

    def test_every_room_has_a_floor_parent(self, fused):
        floor_ids = {str(w.id) for w in fused.ways if w.tag("indoor") == "level"}
        for way in fused.area_ways(("room", "corridor")):
            assert way.tag("osmAG:parent") in floor_ids

    def test_vertical_passage_created(self, fused):
        vertical = [w for w in fused.passage_ways()
                    if ";" in (w.tag("level") or "")]
        assert len(vertical) == 1
        way = vertical[0]
        assert way.tag("level") == "0;1"
        assert way.tag("indoor") == "stairs"
        assert len(way.node_refs) == 2
        lo, hi = way.tag("level").split(";")
        assert abs(int(hi) - int(lo)) == 1

    def test_hierarchy_valid_and_connected(self, fused):
        assert validate_hierarchy(fused) == []
        assert room_graph_connected(fused)
        assert validate_osmag(fused) == []

    def test_ids_unique_and_negative(self, fused):
        ids = [n.id for n in fused.nodes] + [w.id for w in fused.ways]
        assert len(ids) == len(set(ids))
        assert all(i < 0 for i in ids)

    def test_level_preservation_of_geometry(self, fused):
        source = floor_map(0)
        fused_coords = {(round(n.lat, 7), round(n.lon, 7)) for n in fused.nodes}
        for node in source.nodes:
            assert (round(node.lat, 7), round(node.lon, 7)) in fused_coords
        level0_rooms = [w for w in fused.area_ways(("room", "corridor"))
                        if w.tag("level") == "0"]
        assert len(level0_rooms) == len(source.area_ways(("room", "corridor")))

    def test_round_trip(self, fused):
        data = write_osm_xml(fused)
        assert write_osm_xml(read_osm_xml(data)) == data


class TestFusionErrors:
    def test_single_floor_rejected(self):
        with pytest.raises(ConfigError):
            fuse_floors([FloorSpec(floor_map(0), 0)])

    def test_duplicate_level_rejected(self):
        with pytest.raises(DuplicateLevel):
            fuse_floors([FloorSpec(floor_map(0), 3), FloorSpec(floor_map(1), 3)])

    def test_origin_mismatch_rejected(self):
        m0 = floor_map(0)
        m1 = floor_map(1)
        m1.origin = GeoOrigin(48.0, 11.0)
        with pytest.raises(OriginMismatch):
            fuse_floors([FloorSpec(m0, 0), FloorSpec(m1, 1)])


class TestVerticalLinkDetection:
    def test_disjoint_footprints_no_links_warns(self, caplog):
        # second floor shifted far away: no stair overlap, still fused
        shifted = fixtures.two_rooms(names=("Office 301", "Lab 302"))
        for entities in shifted.layers.values():
            for i, ent in enumerate(entities):
                entities[i] = _shift_entity(ent, 50_000.0)
        dxf = fixtures.to_dxf_bytes(shifted)
        m0 = floor_map(0, fixtures.two_rooms_dxf())
        m1 = floor_map(1, dxf)
        with caplog.at_level(logging.WARNING):
            fused = fuse_floors([FloorSpec(m0, 0), FloorSpec(m1, 1)])
        vertical = [w for w in fused.passage_ways() if ";" in (w.tag("level") or "")]
        assert vertical == []
        assert any("no vertical passage" in r.message for r in caplog.records)

    def test_offset_stairs_not_linked(self):
        # stair cores 8.4 m apart: IoU 0 and centroids beyond 2 m
        m0 = floor_map(0, fixtures.to_dxf_bytes(_stair_at(0, flip=False)))
        m1 = floor_map(1, fixtures.to_dxf_bytes(_stair_at(1, flip=True)))
        fused = fuse_floors([FloorSpec(m0, 0), FloorSpec(m1, 1)])
        vertical = [w for w in fused.passage_ways() if ";" in (w.tag("level") or "")]
        assert vertical == []

    def test_elevator_keyword_tags_elevator(self):
        def lift_floor(level):
            doc = fixtures.stair_floor(level)
            for ent in doc.layers["A-ANNO"]:
                pass
            texts = doc.layers["A-ANNO"]
            texts[1] = type(texts[1])(texts[1].anchor, "LIFT A", texts[1].height)
            return fixtures.to_dxf_bytes(doc)

        m0 = floor_map(0, lift_floor(0))
        m1 = floor_map(1, lift_floor(1))
        fused = fuse_floors([FloorSpec(m0, 0), FloorSpec(m1, 1)])
        vertical = [w for w in fused.passage_ways() if ";" in (w.tag("level") or "")]
        assert len(vertical) == 1
        assert vertical[0].tag("indoor") == "elevator"


def _shift_entity(ent, dx_mm):
    from plan2osm.ingest import Line, Text
    if isinstance(ent, Line):
        return Line((ent.start[0] + dx_mm, ent.start[1]),
                    (ent.end[0] + dx_mm, ent.end[1]))
    if isinstance(ent, Text):
        return Text((ent.anchor[0] + dx_mm, ent.anchor[1]), ent.content, ent.height)
    return ent


def _stair_at(level, flip):
    """Stair room on the left or right end of a long 3-room floor."""
    from plan2osm.ingest import Text
    doc = fixtures.three_room_path()
    texts = doc.layers["A-ANNO"]
    stair_index = 2 if flip else 0
    old = texts[stair_index]
    texts[stair_index] = Text(old.anchor, "STAIR-1", old.height)
    return doc


class TestValidateHierarchy:
    def test_cycle_detected(self, fused):
        broken = read_osm_xml(write_osm_xml(fused))
        ways = broken.ways
        a, b = ways[0], ways[1]
        a.tags["osmAG:parent"] = str(b.id)
        b.tags["osmAG:parent"] = str(a.id)
        assert any("cycle" in v for v in validate_hierarchy(broken))

    def test_dangling_parent_detected(self, fused):
        broken = read_osm_xml(write_osm_xml(fused))
        broken.ways[0].tags["osmAG:parent"] = "-999999"
        assert any("missing parent" in v for v in validate_hierarchy(broken))

    def test_unparented_room_detected(self, fused):
        broken = read_osm_xml(write_osm_xml(fused))
        room = broken.area_ways(("room", "corridor"))[0]
        del room.tags["osmAG:parent"]
        assert any("no osmAG:parent" in v for v in validate_hierarchy(broken))
