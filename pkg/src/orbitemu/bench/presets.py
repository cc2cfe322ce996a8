"""Scenario presets for the fidelity and scaling experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..geo import GeodeticCoord
from ..orbits import DEFAULT_NODE_BUDGET, ShellConfig
from ..scenario import GroundStationConfig, LinkDefaults, Scenario

WETLINKS_EPOCH = "2023-09-15T00:00:00Z"
STARLINK_PLANES = 72
STARLINK_SATS_PER_PLANE = 22
STARLINK_INCLINATION_DEG = 53.0

OSNABRUECK = GroundStationConfig("osnabrueck", GeodeticCoord(52.28375864272186, 8.031676892719231))
AERZEN = GroundStationConfig("aerzen", GeodeticCoord(52.06076175017756, 9.329243738284163))
TRIUNFO = GroundStationConfig("triunfo", GeodeticCoord(34.0810947, -118.8991708))

# plane slices keep the 5 degree spacing of the full shell
WETLINKS_RAAN_OFFSET_DEG = 225.0
TRANSATLANTIC_SLICE_PLANES = 24
TRANSATLANTIC_SLICE_OFFSET_DEG = 180.0


@dataclass(frozen=True)
class MeasurementPlan:
    client: str
    server: str
    every_s: float = 180.0
    uplink_mbps: float = 100.0
    downlink_mbps: float = 500.0
    throughput_duration_s: float = 10.0
    ping_count: int = 250
    ping_interval_s: float = 0.1
    throughput: bool = True


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    scenario: Scenario
    plan: MeasurementPlan
    notes: tuple[str, ...] = field(default=())

    def to_json(self) -> str:
        return self.scenario.canonical_json()


def starlink_slice(planes: int, raan_offset_deg: float = 0.0, altitude_km: float = 550.0) -> ShellConfig:
    """``planes`` consecutive planes of the 72-plane shell (full shell when planes == 72)."""
    arc = 2 * math.pi if planes == STARLINK_PLANES else planes / STARLINK_PLANES * 2 * math.pi
    return ShellConfig(
        planes=planes,
        sats_per_plane=STARLINK_SATS_PER_PLANE,
        inclination_deg=STARLINK_INCLINATION_DEG,
        altitude_km=altitude_km,
        raan_arc_rad=arc,
        raan_offset_deg=raan_offset_deg,
    )


def scenario_wetlinks(duration_s: float = 3600.0, link_defaults: LinkDefaults | None = None) -> ScenarioPreset:
    scenario = Scenario(
        epoch=WETLINKS_EPOCH,
        step_seconds=5.0,
        duration_seconds=duration_s,
        shells=(starlink_slice(10, WETLINKS_RAAN_OFFSET_DEG),),
        ground_stations=(OSNABRUECK, AERZEN),
        link_defaults=link_defaults or LinkDefaults(),
    )
    plan = MeasurementPlan(client=OSNABRUECK.node_id, server=AERZEN.node_id)
    return ScenarioPreset("wetlinks", scenario, plan)


def scenario_transatlantic(
    duration_s: float = 3600.0,
    node_budget: int = DEFAULT_NODE_BUDGET,
    link_defaults: LinkDefaults | None = None,
) -> ScenarioPreset:
    """Aerzen to Triunfo Pass over ISLs.

    Uses the whole 72-plane shell when it fits in ``node_budget``, otherwise a
    24-plane slice starting at 180 degrees, which keeps both sites covered on
    the preset date.
    """
    full = STARLINK_PLANES * STARLINK_SATS_PER_PLANE + 2
    if full <= node_budget:
        shell = starlink_slice(STARLINK_PLANES)
        notes = ("full 72-plane shell",)
    else:
        shell = starlink_slice(TRANSATLANTIC_SLICE_PLANES, TRANSATLANTIC_SLICE_OFFSET_DEG)
        notes = (f"{TRANSATLANTIC_SLICE_PLANES}-plane slice from {TRANSATLANTIC_SLICE_OFFSET_DEG} deg "
                 f"(full shell needs {full} nodes, budget {node_budget})",)
    scenario = Scenario(
        epoch=WETLINKS_EPOCH,
        step_seconds=5.0,
        duration_seconds=duration_s,
        shells=(shell,),
        ground_stations=(AERZEN, TRIUNFO),
        link_defaults=link_defaults or LinkDefaults(),
    )
    plan = MeasurementPlan(client=AERZEN.node_id, server=TRIUNFO.node_id, throughput=False)
    return ScenarioPreset("transatlantic", scenario, plan, notes)


PRESETS = {"wetlinks": scenario_wetlinks, "transatlantic": scenario_transatlantic}


def sized_scenario(planes: int, duration_s: float = 0.0, step_s: float = 5.0,
                   full_arc: bool = True, sats_per_plane: int = STARLINK_SATS_PER_PLANE) -> Scenario:
    """Scaling-experiment scenario: ``planes`` x ``sats_per_plane`` plus the two WetLinks sites.

    ``full_arc=False`` takes consecutive 5-degree planes starting at the
    WetLinks offset instead of spreading them around the globe.
    """
    if full_arc:
        shell = ShellConfig(planes, sats_per_plane, STARLINK_INCLINATION_DEG)
    else:
        shell = ShellConfig(planes, sats_per_plane, STARLINK_INCLINATION_DEG,
                            raan_arc_rad=planes / STARLINK_PLANES * 2 * math.pi,
                            raan_offset_deg=WETLINKS_RAAN_OFFSET_DEG)
    return Scenario(
        epoch=WETLINKS_EPOCH,
        step_seconds=step_s,
        duration_seconds=duration_s,
        shells=(shell,),
        ground_stations=(OSNABRUECK, AERZEN),
    )
