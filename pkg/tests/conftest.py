import math

import pytest

from orbitemu.bench.presets import AERZEN, OSNABRUECK
from orbitemu.geo import GeodeticCoord
from orbitemu.orbits import ShellConfig
from orbitemu.scenario import GroundStationConfig, LinkDefaults, Scenario

EPOCH = "2023-09-15T00:00:00Z"


def small_scenario(planes=4, sats=6, duration=60.0, step=5.0, *, full_arc=True, ground=None, **kw):
    arc = 2 * math.pi if full_arc else planes / 72 * 2 * math.pi
    shell = ShellConfig(planes, sats, 53.0, raan_arc_rad=arc, raan_offset_deg=0 if full_arc else 225.0)
    if ground is None:
        ground = (OSNABRUECK, AERZEN)
    return Scenario(EPOCH, step, duration, (shell,), tuple(ground), **kw)


def slice_scenario(duration=600.0, **kw):
    """The 10x22 slice over the two German sites."""
    shell = ShellConfig(10, 22, 53.0, raan_arc_rad=10 / 72 * 2 * math.pi, raan_offset_deg=225.0)
    return Scenario(EPOCH, 5.0, duration, (shell,), (OSNABRUECK, AERZEN), **kw)


@pytest.fixture
def wide_gs():
    return GroundStationConfig("wide", GeodeticCoord(0, 0), min_elevation_deg=0)


@pytest.fixture
def lossless():
    return LinkDefaults.lossless()


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
