import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import EPOCH, slice_scenario, small_scenario
from orbitemu.geo import (
    EcefPos,
    GeodeticCoord,
    SimInstant,
    distance_m,
    elevation_deg,
    geodetic_to_ecef,
    propagation_delay_us,
)
from orbitemu.orbits import SatelliteId, ShellConfig, generate_shell, propagate
from orbitemu.scenario import BoundingBox, GroundStationConfig, LinkDefaults, Scenario, ScenarioError
from orbitemu.topology import (
    NodeState,
    is_ground_node,
    isl_neighbors,
    isl_pairs,
    link_key,
    select_gsl,
    snapshot,
    snapshot_series,
)

T0 = SimInstant.at(EPOCH)


def test_partial_shell_corner_neighbors():
    cfg = ShellConfig(10, 22, 53, raan_arc_rad=10 / 72 * 2 * math.pi)
    got = isl_neighbors(SatelliteId(0, 0, 0), cfg)
    assert got == {SatelliteId(0, 0, 1), SatelliteId(0, 0, 21), SatelliteId(0, 1, 0)}


def test_full_shell_interior_and_seam():
    cfg = ShellConfig(72, 22, 53)
    assert len(isl_neighbors(SatelliteId(0, 5, 10), cfg)) == 4
    assert SatelliteId(0, 71, 3) in isl_neighbors(SatelliteId(0, 0, 3), cfg)


def _grid_edge_count(P, S, seam):
    # handshake oracle: sum of degrees / 2 on an explicit adjacency construction
    edges = set()
    for p in range(P):
        for s in range(S):
            for q, t in ((p, (s + 1) % S), (p + 1, s)):
                if q == P:
                    if not seam:
                        continue
                    q = 0
                a, b = (p, s), (q, t)
                if a != b:
                    edges.add(frozenset((a, b)))
    return len(edges)


def test_full_shell_isl_count():
    assert len(isl_pairs(ShellConfig(72, 22, 53))) == 3168 == 2 * 72 * 22 == _grid_edge_count(72, 22, True)


@settings(max_examples=40)
@given(st.integers(1, 9), st.integers(1, 9), st.booleans())
def test_isl_relation_symmetric_and_counted(P, S, full):
    cfg = ShellConfig(P, S, 53, raan_arc_rad=2 * math.pi if full else 1.0)
    for p in range(P):
        for s in range(S):
            me = SatelliteId(0, p, s)
            for other in isl_neighbors(me, cfg):
                assert me in isl_neighbors(other, cfg)
            assert len(isl_neighbors(me, cfg)) <= 4
    assert len(isl_pairs(cfg)) == _grid_edge_count(P, S, full)


def _brute_force_gsl(gs, sats):
    g = geodetic_to_ecef(gs.location)
    best = None
    for sid in sorted(sats):
        p = sats[sid]
        if elevation_deg(g, p) >= gs.min_elevation_deg:
            key = (round(distance_m(g, p) * 1000), sid)
            if best is None or key < best:
                best = key
    return None if best is None else best[1]


def test_select_single_and_none():
    gs = GroundStationConfig("x", GeodeticCoord(0, 0))
    over = geodetic_to_ecef(GeodeticCoord(0, 0, 550_000))
    under = geodetic_to_ecef(GeodeticCoord(0, 180, 550_000))
    assert select_gsl(gs, {"sat0-000-000": over}) == "sat0-000-000"
    assert select_gsl(gs, {"sat0-000-000": under}) is None
    assert select_gsl(gs, {}) is None


def test_select_closer_of_two():
    gs = GroundStationConfig("x", GeodeticCoord(0, 0), min_elevation_deg=0)
    g = geodetic_to_ecef(gs.location)
    # put two satellites at 900 km and 1100 km along the local vertical
    up = np.array(g.as_tuple()) / g.norm()
    near = EcefPos(*(np.array(g.as_tuple()) + up * 900e3))
    far = EcefPos(*(np.array(g.as_tuple()) + up * 1100e3))
    assert select_gsl(gs, {"sat0-000-001": far, "sat0-000-002": near}) == "sat0-000-002"


def test_select_tie_smallest_id():
    gs = GroundStationConfig("x", GeodeticCoord(0, 0), min_elevation_deg=0)
    p = geodetic_to_ecef(GeodeticCoord(0, 0, 550e3))
    assert select_gsl(gs, {"sat0-003-000": p, "sat0-001-005": p}) == "sat0-001-005"


shell_positions = st.integers(0, 3599).map(
    lambda k: {sid.node_id: propagate(el, T0.plus(k)) for sid, el in generate_shell(ShellConfig(12, 10, 53))}
)


@settings(max_examples=30, deadline=None)
@given(shell_positions, st.floats(-60, 60), st.floats(-180, 179), st.floats(0, 40))
def test_select_matches_brute_force(sats, lat, lon, mask):
    gs = GroundStationConfig("x", GeodeticCoord(lat, lon), min_elevation_deg=mask)
    chosen = select_gsl(gs, sats)
    assert chosen == _brute_force_gsl(gs, sats)
    if chosen is not None:
        g = geodetic_to_ecef(gs.location)
        d = distance_m(g, sats[chosen])
        for sid, p in sats.items():
            if elevation_deg(g, p) >= mask:
                assert d <= distance_m(g, p) + 1e-3


@settings(max_examples=20, deadline=None)
@given(shell_positions, st.floats(1.0001, 1.5))
def test_select_invariant_under_scaling(sats, k):
    # zero-mask station at the Earth's centre's projection: scaling all positions
    # about the origin scales every distance from a station at the origin
    gs = GroundStationConfig("x", GeodeticCoord(0, 0, 0), min_elevation_deg=0)
    g = np.array(geodetic_to_ecef(gs.location).as_tuple())
    scaled = {s: EcefPos(*(g + k * (np.array(p.as_tuple()) - g))) for s, p in sats.items()}
    assert select_gsl(gs, scaled) == select_gsl(gs, sats)


def test_sticky_keeps_previous_while_visible():
    gs = GroundStationConfig("x", GeodeticCoord(0, 0), min_elevation_deg=0, gsl_mode="sticky")
    near = geodetic_to_ecef(GeodeticCoord(0, 0, 550e3))
    far = geodetic_to_ecef(GeodeticCoord(5, 0, 550e3))
    sats = {"sat0-000-000": near, "sat0-000-001": far}
    assert select_gsl(gs, sats, previous="sat0-000-001") == "sat0-000-001"
    assert select_gsl(gs, sats, previous="sat0-009-009") == "sat0-000-000"
    assert select_gsl(gs, sats) == "sat0-000-000"


def test_snapshot_one_gs_one_sat():
    # one satellite with initial anomaly 0 and RAAN chosen so it starts right above the station
    sc = Scenario(EPOCH, 1, 0, (ShellConfig(1, 1, 0.0),), ())
    pos = snapshot(sc, T0).positions["sat0-000-000"]
    sub = GeodeticCoord(0.0, math.degrees(math.atan2(pos.y_m, pos.x_m)))
    sc = sc.replace(ground_stations=(GroundStationConfig("here", sub),))
    snap = snapshot(sc, T0)
    assert not snap.isl_links
    assert list(snap.gsl_links) == [("gs-here", "sat0-000-000")]
    assert snap.gsl_links[("gs-here", "sat0-000-000")].delay_us == 1835


def test_full_shell_counts():
    sc = Scenario(EPOCH, 5, 0, (ShellConfig(72, 22, 53),), small_scenario().ground_stations)
    snap = snapshot(sc, T0)
    assert len(snap.isl_links) == 3168
    assert len(snap.gsl_links) == 2
    assert all(s is NodeState.STARTED for s in snap.nodes.values())


def test_snapshot_invariants_and_delays():
    sc = slice_scenario()
    for k in (0, 7, 60):
        snap = snapshot(sc, sc.instant(k))
        started = snap.started_nodes()
        for (a, b), props in snap.links.items():
            assert a < b and a in started and b in started
            d = distance_m(snap.positions[a], snap.positions[b])
            assert props.delay_us == propagation_delay_us(d)
        for (a, b), props in snap.gsl_links.items():
            assert is_ground_node(a) and not is_ground_node(b)
            assert props.loss_pct == 1.0 and props.rate_mbps == 1000
        for props in snap.isl_links.values():
            assert props.rate_mbps == 10_000
        per_gs = [a for a, _ in snap.gsl_links]
        assert len(per_gs) == len(set(per_gs))
        assert set(snap.isl_links) == set(isl_pairs(sc.shells[0]))


def test_whole_globe_box_suspends_nothing():
    sc = slice_scenario(bounding_box=BoundingBox.whole_globe())
    snap = snapshot(sc, sc.instant(3))
    assert all(s is NodeState.STARTED for s in snap.nodes.values())


def test_box_suspends_outside_and_drops_links():
    box = BoundingBox(30, 70, -20, 40)
    sc = slice_scenario(bounding_box=box)
    snap = snapshot(sc, sc.instant(0))
    suspended = {n for n, s in snap.nodes.items() if s is NodeState.SUSPENDED}
    assert suspended and not any(is_ground_node(n) for n in suspended)
    for n in suspended:
        g = snap.positions[n]
        lat = math.degrees(math.atan2(g.z_m, math.hypot(g.x_m, g.y_m)))
        lon = math.degrees(math.atan2(g.y_m, g.x_m))
        assert not box.contains(lat, lon)
    for a, b in snap.links:
        assert a not in suspended and b not in suspended


def test_box_wraps_antimeridian():
    box = BoundingBox(-10, 10, 170, -170)
    assert box.contains(0, 175) and box.contains(0, -175)
    assert not box.contains(0, 0)


boxes = st.tuples(st.floats(-90, 0), st.floats(0, 90), st.floats(-180, 0), st.floats(0, 180))


@settings(max_examples=15, deadline=None)
@given(boxes, st.floats(0, 0.9))
def test_shrinking_box_never_adds_active_nodes(box, shrink):
    lat0, lat1, lon0, lon1 = box
    outer = BoundingBox(lat0, lat1, lon0, lon1)
    inner = BoundingBox(lat0 * shrink, lat1 * shrink, lon0 * shrink, lon1 * shrink)
    sc = small_scenario(6, 8)
    def active(b):
        return len(snapshot(sc.replace(bounding_box=b), sc.instant(2)).started_nodes())
    assert active(inner) <= active(outer)


def test_sticky_series_has_fewer_handovers():
    closest = slice_scenario(duration=1800)
    sticky_gs = tuple(GroundStationConfig(g.name, g.location, g.min_elevation_deg, "sticky")
                      for g in closest.ground_stations)
    sticky = closest.replace(ground_stations=sticky_gs)

    def switches(sc):
        seq = [snap.gsl_of("gs-aerzen") for snap in snapshot_series(sc)]
        return sum(a != b for a, b in zip(seq, seq[1:]))

    assert switches(sticky) < switches(closest)


def test_scenario_validation():
    with pytest.raises(ScenarioError):
        small_scenario(ground=(GroundStationConfig("a", GeodeticCoord(0, 0)),) * 2)
    with pytest.raises(ScenarioError):
        Scenario(EPOCH, 5, 10, ())
    with pytest.raises(ScenarioError):
        GroundStationConfig("a", GeodeticCoord(0, 0), min_elevation_deg=90)
    with pytest.raises(ScenarioError):
        small_scenario(step=0.0005)


def test_scenario_json_roundtrip_and_digest():
    sc = small_scenario(bounding_box=BoundingBox(-10, 10, 170, -170), link_defaults=LinkDefaults.opensn())
    again = Scenario.from_dict(sc.to_dict())
    assert again == sc
    assert again.digest() == sc.digest()
    assert sc.replace(duration_seconds=61).digest() != sc.digest()


def test_scenario_schema_rejects_unknown_keys():
    data = small_scenario().to_dict()
    data["extra"] = 1
    with pytest.raises(ScenarioError, match="schema"):
        Scenario.from_dict(data)


def test_link_key_sorted():
    assert link_key("sat0-000-001", "gs-a") == ("gs-a", "sat0-000-001")
