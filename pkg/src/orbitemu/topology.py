"""Per-instant constellation topology: nodes, +Grid ISLs, GSLs and link properties."""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .geo import (
    EcefPos,
    SimInstant,
    distance_m,
    geodetic_to_ecef,
    propagation_delay_us,
)
from .orbits import ElementArrays, SatelliteId, ShellConfig, generate_shell
from .scenario import GroundStationConfig, LinkClassDefaults, Scenario

LinkKey = tuple[str, str]


class NodeState(str, enum.Enum):
    CREATED = "created"
    STARTED = "started"
    SUSPENDED = "suspended"


@dataclass(frozen=True)
class LinkProps:
    delay_us: int
    loss_pct: float
    rate_mbps: float

    def as_list(self) -> list:
        return [self.delay_us, self.loss_pct, self.rate_mbps]


def link_key(a: str, b: str) -> LinkKey:
    return (a, b) if a <= b else (b, a)


def is_ground_node(node_id: str) -> bool:
    return node_id.startswith("gs-")


@dataclass
class TopologySnapshot:
    t: SimInstant
    nodes: dict[str, NodeState]
    isl_links: dict[LinkKey, LinkProps]
    gsl_links: dict[LinkKey, LinkProps]
    positions: dict[str, EcefPos] = field(default_factory=dict, repr=False, compare=False)
    # ground node -> [(satellite node, GSL props)] for every visible satellite, closest first
    visible: dict[str, list[tuple[str, LinkProps]]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def links(self) -> dict[LinkKey, LinkProps]:
        merged = dict(self.isl_links)
        merged.update(self.gsl_links)
        return merged

    def gsl_of(self, gs_node: str) -> str | None:
        for a, b in self.gsl_links:
            if a == gs_node:
                return b
        return None

    def started_nodes(self) -> set[str]:
        return {n for n, s in self.nodes.items() if s is NodeState.STARTED}


def isl_neighbors(sat: SatelliteId, cfg: ShellConfig) -> set[SatelliteId]:
    """+Grid neighbours: two in-plane, up to two cross-plane.

    Cross-plane links wrap between the first and last plane only for a
    full-arc shell; a partial arc has no seam.
    """
    P, S = cfg.planes, cfg.sats_per_plane
    out = {
        SatelliteId(sat.shell, sat.plane, (sat.slot + 1) % S),
        SatelliteId(sat.shell, sat.plane, (sat.slot - 1) % S),
    }
    for dp in (1, -1):
        p = sat.plane + dp
        if 0 <= p < P:
            out.add(SatelliteId(sat.shell, p, sat.slot))
        elif cfg.full_arc:
            out.add(SatelliteId(sat.shell, p % P, sat.slot))
    out.discard(sat)
    return out


def isl_pairs(cfg: ShellConfig, shell_index: int = 0) -> list[LinkKey]:
    pairs = set()
    for p in range(cfg.planes):
        for s in range(cfg.sats_per_plane):
            me = SatelliteId(shell_index, p, s)
            for other in isl_neighbors(me, cfg):
                pairs.add(link_key(me.node_id, other.node_id))
    return sorted(pairs)


def _visible_order(gs_pos: np.ndarray, sat_pos: np.ndarray, sat_ids: list[str], mask_deg: float) -> list[str]:
    """Satellite ids at or above the elevation mask, nearest first, ties by id."""
    if len(sat_ids) == 0:
        return []
    rel = sat_pos - gs_pos
    rng = np.sqrt(np.einsum("ij,ij->i", rel, rel))
    up = gs_pos / np.linalg.norm(gs_pos)
    with np.errstate(invalid="ignore", divide="ignore"):
        sin_el = np.where(rng > 0, (rel @ up) / rng, 1.0)
    visible = np.nonzero(sin_el >= math.sin(math.radians(mask_deg)))[0]
    # millimetre resolution so symmetric geometry ties on distance, not on float noise
    rng_mm = np.round(rng * 1000.0)
    return [sat_ids[i] for i in sorted(visible, key=lambda i: (rng_mm[i], sat_ids[i]))]


def select_gsl(
    gs: GroundStationConfig,
    sats: Mapping[str, EcefPos],
    previous: str | None = None,
) -> str | None:
    """Pick the satellite node a ground station attaches to.

    ``closest`` takes the nearest satellite above the mask (smallest id on a
    tie). ``sticky`` keeps ``previous`` while it stays visible. Returns None
    when nothing is visible.
    """
    ids = sorted(sats)
    if not ids:
        return None
    pos = np.array([sats[i].as_tuple() for i in ids], dtype=float)
    gs_pos = np.array(geodetic_to_ecef(gs.location).as_tuple())
    order = _visible_order(gs_pos, pos, ids, gs.min_elevation_deg)
    return _choose(gs, order, previous)


def _choose(gs: GroundStationConfig, order: list[str], previous: str | None) -> str | None:
    if not order:
        return None
    if gs.gsl_mode == "sticky" and previous is not None and previous in order:
        return previous
    return order[0]


class Constellation:
    """Precomputed per-scenario structure reused across many snapshots."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        ids: list[SatelliteId] = []
        elements = []
        self.isl_keys: list[LinkKey] = []
        for k, shell in enumerate(scenario.shells):
            for sid, el in generate_shell(shell, k):
                ids.append(sid)
                elements.append(el)
            self.isl_keys.extend(isl_pairs(shell, k))
        self.sat_ids = ids
        self.sat_nodes = [s.node_id for s in ids]
        self.elements = elements
        self.arrays = ElementArrays(elements)
        self.ground = list(scenario.ground_stations)
        self.gs_nodes = [gs.node_id for gs in self.ground]
        self.gs_pos = {gs.node_id: geodetic_to_ecef(gs.location) for gs in self.ground}
        self._gs_vec = {n: np.array(p.as_tuple()) for n, p in self.gs_pos.items()}

    @staticmethod
    @functools.lru_cache(maxsize=16)
    def for_scenario(scenario: Scenario) -> "Constellation":
        return Constellation(scenario)

    def _props(self, d: float, defaults: LinkClassDefaults) -> LinkProps:
        return LinkProps(propagation_delay_us(d), defaults.loss_pct, defaults.rate_mbps)

    def snapshot(self, t: SimInstant, previous_gsl: Mapping[str, str | None] | None = None) -> TopologySnapshot:
        sc = self.scenario
        xyz = self.arrays.positions(t)
        positions = {n: EcefPos(*row) for n, row in zip(self.sat_nodes, xyz.tolist())}
        positions.update(self.gs_pos)

        nodes: dict[str, NodeState] = {}
        if sc.bounding_box is None:
            started_mask = np.ones(len(self.sat_nodes), dtype=bool)
        else:
            lat = np.degrees(np.arctan2(xyz[:, 2], np.hypot(xyz[:, 0], xyz[:, 1])))
            lon = np.degrees(np.arctan2(xyz[:, 1], xyz[:, 0]))
            started_mask = np.asarray(sc.bounding_box.contains(lat, lon), dtype=bool)
        for n, on in zip(self.sat_nodes, started_mask.tolist()):
            nodes[n] = NodeState.STARTED if on else NodeState.SUSPENDED
        for n in self.gs_nodes:
            nodes[n] = NodeState.STARTED

        isl = {}
        for a, b in self.isl_keys:
            if nodes[a] is NodeState.STARTED and nodes[b] is NodeState.STARTED:
                isl[(a, b)] = self._props(distance_m(positions[a], positions[b]), sc.link_defaults.isl)

        started_idx = np.nonzero(started_mask)[0]
        started_ids = [self.sat_nodes[i] for i in started_idx]
        started_xyz = xyz[started_idx]
        gsl = {}
        visible = {}
        previous_gsl = previous_gsl or {}
        for gs, gs_node in zip(self.ground, self.gs_nodes):
            order = _visible_order(self._gs_vec[gs_node], started_xyz, started_ids, gs.min_elevation_deg)
            visible[gs_node] = [
                (sat, self._props(distance_m(positions[gs_node], positions[sat]), sc.link_defaults.gsl))
                for sat in order
            ]
            chosen = _choose(gs, order, previous_gsl.get(gs_node))
            if chosen is not None:
                gsl[link_key(gs_node, chosen)] = dict(visible[gs_node])[chosen]
        return TopologySnapshot(t, nodes, isl, gsl, positions, visible)


def snapshot(scenario: Scenario, t: SimInstant, previous_gsl: Mapping[str, str | None] | None = None) -> TopologySnapshot:
    """Topology of ``scenario`` at ``t``.

    ``previous_gsl`` (ground node -> satellite node) only matters for ground
    stations in sticky mode.
    """
    return Constellation.for_scenario(scenario).snapshot(t, previous_gsl)


def resolve_sticky(scenario: Scenario, snap: TopologySnapshot, previous_gsl: Mapping[str, str | None]) -> TopologySnapshot:
    """Re-select sticky GSLs of an already computed snapshot given the prior choice."""
    sticky = [gs for gs in scenario.ground_stations if gs.gsl_mode == "sticky"]
    if not sticky:
        return snap
    gsl = dict(snap.gsl_links)
    for gs in sticky:
        node = gs.node_id
        current = snap.gsl_of(node)
        candidates = dict(snap.visible.get(node, []))
        chosen = _choose(gs, [sat for sat, _ in snap.visible.get(node, [])], previous_gsl.get(node))
        if chosen == current:
            continue
        if current is not None:
            del gsl[link_key(node, current)]
        if chosen is not None:
            gsl[link_key(node, chosen)] = candidates[chosen]
    return TopologySnapshot(snap.t, snap.nodes, snap.isl_links, gsl, snap.positions, snap.visible)


def snapshot_series(scenario: Scenario, steps: range | None = None) -> list[TopologySnapshot]:
    """Sequential snapshots at every step, threading sticky GSL state through."""
    if steps is None:
        steps = range(scenario.step_count + 1)
    out = []
    previous: dict[str, str | None] = {}
    for k in steps:
        snap = snapshot(scenario, scenario.instant(k), previous)
        previous = {gs: snap.gsl_of(gs) for gs in snap.visible}
        out.append(snap)
    return out
