"""End-to-end acceptance criteria, each reported as a PASS/FAIL line."""
import itertools
import math
import random
import statistics
import time

import pytest

from conftest import ACCEPTANCE_LINES, EPOCH
from orbitemu.backends import RecordingBackend, SimulatedBackend, linux, sim_ping
from orbitemu.backends.base import LINK_OPS, NODE_OPS
from orbitemu.backends.measure import shortest_path
from orbitemu.backends.simulated import NetGraph
from orbitemu.bench import (
    bench_updates,
    fidelity_run,
    scenario_transatlantic,
    scenario_wetlinks,
    sized_scenario,
)
from orbitemu.engine import bring_up, percentile, run, tear_down
from orbitemu.geo import GeodeticCoord, propagation_delay_us, slant_range_m
from orbitemu.orbits import ShellConfig, orbital_period_s
from orbitemu.scenario import GroundStationConfig, LinkDefaults, Scenario
from orbitemu.topology import LinkProps, NodeState, snapshot
from orbitemu.trace import precompute, replay, write_trace

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def verdict(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} {title} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def transatlantic_runs():
    t0 = time.perf_counter()
    grid = fidelity_run(scenario_transatlantic(), backend=SimulatedBackend(mode="grid"))
    elapsed = time.perf_counter() - t0
    star = fidelity_run(scenario_transatlantic(), backend=SimulatedBackend(mode="star"))
    return grid, star, elapsed


@pytest.fixture(scope="module")
def slice_hour_trace():
    scenario = scenario_wetlinks().scenario
    t0 = time.perf_counter()
    trace = precompute(scenario, delay_quantum_us=0)
    return scenario, trace, time.perf_counter() - t0


def test_1_transatlantic_multihop(transatlantic_runs):
    grid, _, elapsed = transatlantic_runs
    rtts = [v / 1000.0 for rec in grid.pings() for v in rec.values]
    hops = [h for rec in grid.pings() for h in rec.path_hops]
    rtt_ok = bool(rtts) and all(60 <= r <= 130 for r in rtts)
    hops_ok = bool(hops) and all(6 <= h <= 12 for h in hops)
    detail = (f"{len(rtts)} samples, RTT {min(rtts):.1f}-{max(rtts):.1f} ms "
              f"median {statistics.median(rtts):.1f}, hops {min(hops)}-{max(hops)} "
              f"median {statistics.median(hops)}, {elapsed:.0f} s")
    verdict(1, "transatlantic grid RTT in [60,130] ms and hops in [6,12]",
            rtt_ok and hops_ok and elapsed < 120, detail)


def test_2_star_mode(transatlantic_runs):
    grid, star, _ = transatlantic_runs
    star_hops = {h for rec in star.pings() for h in rec.path_hops}
    pairs = list(zip(grid.rtt_timeline, star.rtt_timeline))
    below = all(s[1] is not None and g[1] is not None and s[1] < g[1] for g, s in pairs)
    verdict(2, "star mode 2 hops, RTT below grid", star_hops == {2} and below,
            f"star hops {sorted(star_hops)}, {len(pairs)} steps compared")


def _path_loss_at(trace, states, t: float, src: str, dst: str) -> float:
    """Path loss the trace implies at time t, routed on an independently rebuilt graph."""
    k = min(int(math.floor(t / trace.header.step_seconds + 1e-9)), trace.header.step_count)
    state = states[k]
    return shortest_path(NetGraph.from_links(state.links, nodes=state.nodes), src, dst).loss_fraction


def test_3_wetlinks_fidelity():
    lossless = fidelity_run(scenario_wetlinks(link_defaults=LinkDefaults.lossless()))
    timeline = {k: rtt for k, rtt, _ in lossless.rtt_timeline}
    handover_steps = sorted({h.step_index for h in lossless.handovers})
    jumps = all(timeline[k] != timeline[k - 1] for k in handover_steps)
    # piecewise constant: ping samples taken within one trace step share one RTT
    step = lossless.trace.header.step_seconds
    constant = True
    for rec in lossless.pings():
        by_step = {}
        for s in rec.samples:
            by_step.setdefault(int(math.floor(s.t_offset_s / step + 1e-9)), set()).add(s.value)
        constant &= all(len(v) == 1 for v in by_step.values())
        constant &= all(timeline[k] in v for k, v in by_step.items())

    preset = scenario_wetlinks()
    lossy = fidelity_run(preset)
    assert not preset.scenario.gsl_contention
    plan = preset.plan
    states = list(replay(lossy.trace.diffs))
    worst = 0.0
    checked = 0
    for i, rec in enumerate(lossy.throughputs()):
        # sessions alternate uplink, downlink within each cycle
        target = plan.uplink_mbps if i % 2 == 0 else plan.downlink_mbps
        for s in rec.samples:
            loss = _path_loss_at(lossy.trace, states, s.t_offset_s, plan.client, plan.server)
            worst = max(worst, abs(s.value - target * (1 - loss)))
            checked += 1
    ok = len(lossless.handovers) >= 1 and jumps and constant and worst <= 1.0
    verdict(3, "WetLinks handovers, piecewise-constant RTT, capped goodput", ok,
            f"{len(lossless.handovers)} handovers, jump at every handover={jumps}, "
            f"constant within steps={constant}, worst goodput error {worst:.3f} Mbps over {checked} samples")


def test_4_replay_oracle(slice_hour_trace):
    scenario, trace, elapsed = slice_hour_trace
    t0 = time.perf_counter()
    mismatches = 0
    prev = None
    steps = 0
    for k, state in enumerate(replay(trace.diffs)):
        snap = snapshot(scenario, scenario.instant(k), previous_gsl=prev)
        prev = {gs.node_id: snap.gsl_of(gs.node_id) for gs in scenario.ground_stations}
        if state.links != snap.links:
            mismatches += 1
        steps += 1
    total = elapsed + time.perf_counter() - t0
    ok = steps == 721 and trace.header.step_count == 720 and mismatches == 0 and total < 300
    verdict(4, "replay reproduces every snapshot exactly", ok,
            f"{steps} states, {mismatches} mismatches, {total:.0f} s")


def test_5_determinism(slice_hour_trace, tmp_path):
    scenario, one, _ = slice_hour_trace
    eight = precompute(scenario, workers=8, delay_quantum_us=0)
    write_trace(one, tmp_path / "w1.jsonl")
    write_trace(eight, tmp_path / "w8.jsonl")
    same_trace = (tmp_path / "w1.jsonl").read_bytes() == (tmp_path / "w8.jsonl").read_bytes()
    g = SimulatedBackend()
    bring_up(one, g)
    a = sim_ping(g.graph, "gs-osnabrueck", "gs-aerzen", seed=42)
    b = sim_ping(g.graph, "gs-osnabrueck", "gs-aerzen", seed=42)
    same_ping = list(a.rows()) == list(b.rows()) and a.lost == b.lost
    verdict(5, "1 vs 8 workers byte-identical, seeded ping identical", same_trace and same_ping,
            f"trace identical={same_trace}, ping identical={same_ping}")


REALTIME_FACTOR = 50.0


def test_6_update_lag():
    scenario = sized_scenario(20, duration_s=3600.0, step_s=5.0)
    trace = precompute(scenario)
    backend = SimulatedBackend()
    try:
        bring_up(trace, backend, scenario=scenario)
        reports = run(trace, backend, realtime_factor=REALTIME_FACTOR)
    finally:
        tear_down(backend)
    p99 = percentile([r.lag_ms for r in reports], 99)
    rows, _ = bench_updates([5, 10, 15, 20], duration_s=60.0, realtime_factor=math.inf, mode="online")
    compute = [r.mean_compute_ms for r in rows]
    growing = all(x < y for x, y in zip(compute, compute[1:]))
    verdict(6, "20x22 p99 apply lag < 100 ms; online compute grows with size", p99 < 100 and growing,
            f"{len(reports)} steps at {REALTIME_FACTOR:g}x, p99 {p99:.2f} ms, "
            f"online compute ms {[round(c, 1) for c in compute]}")


def test_7_geometry_oracles():
    period = orbital_period_s(550_000)
    slant = slant_range_m(550_000, 25.0)
    sc = Scenario(EPOCH, 1, 0, (ShellConfig(1, 1, 0.0),), ())
    pos = snapshot(sc, sc.instant(0)).positions["sat0-000-000"]
    sub = GeodeticCoord(0.0, math.degrees(math.atan2(pos.y_m, pos.x_m)))
    sc = sc.replace(ground_stations=(GroundStationConfig("zenith", sub),))
    zenith = snapshot(sc, sc.instant(0)).gsl_links[("gs-zenith", "sat0-000-000")].delay_us
    ok = abs(period - 5730) <= 1 and abs(slant - 1_123_000) <= 1000 and abs(zenith - 1835) <= 1
    assert propagation_delay_us(550_000) == zenith
    verdict(7, "period, slant range and zenith delay", ok,
            f"period {period:.2f} s, slant {slant / 1000:.2f} km, zenith {zenith} us")


def _exhaustive(links: dict, nodes: list[str], src: str, dst: str):
    adj = {n: {} for n in nodes}
    for (a, b), p in links.items():
        adj[a][b] = adj[b][a] = p.delay_us
    best = None

    def walk(path, delay):
        nonlocal best
        u = path[-1]
        if u == dst:
            cand = (delay, tuple(path))
            if best is None or cand < best:
                best = cand
            return
        for v, w in adj[u].items():
            if v not in path:
                path.append(v)
                walk(path, delay + w)
                path.pop()

    walk([src], 0)
    return best


def test_8_shortest_path_exhaustive():
    rng = random.Random(2023)
    mismatches = 0
    for _ in range(200):
        n = rng.randint(2, 12)
        nodes = [f"sat0-000-{i:03d}" for i in range(n)]
        links = {}
        for a, b in itertools.combinations(nodes, 2):
            if rng.random() < 0.35:
                links[(a, b)] = LinkProps(rng.randint(1, 20), 0.0, 100.0)
        g = NetGraph.from_links(links, nodes={x: NodeState.STARTED for x in nodes})
        src, dst = rng.sample(nodes, 2)
        route = shortest_path(g, src, dst)
        want = _exhaustive(links, nodes, src, dst)
        got = None if route is None else (route.delay_us, route.nodes)
        mismatches += got != want
    verdict(8, "Dijkstra equals exhaustive search on 200 graphs", mismatches == 0,
            f"{mismatches} mismatches")


def test_9_bringup_ordering():
    scenario = sized_scenario(10)
    trace = precompute(scenario)
    backend = RecordingBackend(latency_s=0.0005)
    report = bring_up(trace, backend, scenario=scenario)
    seqs = {"node": [e.seq for e in backend.ledger if e.op in NODE_OPS],
            "link": [e.seq for e in backend.ledger if e.op in LINK_OPS]}
    ordered = max(seqs["node"]) < min(seqs["link"])
    ledger_nodes = backend.node_phase_span()
    ledger_links = backend.phase_span(LINK_OPS)
    close = (abs(report.node_phase_s - ledger_nodes) <= 0.1 * ledger_nodes
             and abs(report.network_phase_s - ledger_links) <= 0.1 * ledger_links)
    verdict(9, "node ops precede link ops, phase times match ledger", ordered and close,
            f"nodes {report.node_phase_s:.3f}/{ledger_nodes:.3f} s, "
            f"links {report.network_phase_s:.3f}/{ledger_links:.3f} s")


def test_10_linux_backend():
    reason = linux.unavailable_reason()
    if reason is not None:
        line = f"ACCEPTANCE 10: SKIP linux backend ping ({reason})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        pytest.skip(reason)
    b = linux.LinuxNetnsBackend(prefix="oeacc")
    try:
        for n in ("gs-a", "sat0-000-000"):
            b.create_node(n)
            b.start_node(n)
        key = ("gs-a", "sat0-000-000")
        b.add_link(key, LinkProps(1000, 0.0, 1000.0))
        b.update_link(key, LinkProps(5000, 0.0, 1000.0))
        rtt = b.ping_rtt_ms(key, count=5)
    finally:
        tear_down(b)
    verdict(10, "5 ms one-way link pings at 10 ms RTT", rtt is not None and abs(rtt - 10) <= 1.0,
            f"RTT {rtt} ms")
