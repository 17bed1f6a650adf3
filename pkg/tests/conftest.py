import pytest

from plan2osm import fixtures
from plan2osm.config import PipelineConfig
from plan2osm.pipeline import convert_bytes


def make_config(**overrides) -> PipelineConfig:
    base = dict(origin_lat=31.0, origin_lon=121.0)
    base.update(overrides)
    return PipelineConfig(**base).validate()


@pytest.fixture(scope="session")
def config():
    return make_config()


@pytest.fixture(scope="session")
def two_rooms_osm(config):
    osm, report = convert_bytes(fixtures.two_rooms_dxf(), config)
    return osm, report


@pytest.fixture(scope="session")
def grid_rooms_osm(config):
    osm, report = convert_bytes(fixtures.grid_rooms_dxf(), config)
    return osm, report
