"""Measurement oracles over a :class:`NetGraph`: routing, ping and goodput."""
from __future__ import annotations

import csv
import heapq
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ..topology import LinkKey, LinkProps, NodeState, is_ground_node
from .simulated import NetGraph

HUB = "hub"
DEFAULT_PER_HOP_PROCESSING_US = 100
DIRECTIONS = ("uplink", "downlink")


@dataclass(frozen=True)
class Route:
    nodes: tuple[str, ...]
    delay_us: int
    # links actually traversed in the constellation, in path order
    keys: tuple[LinkKey, ...]
    props: tuple[LinkProps, ...]

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    @property
    def loss_fraction(self) -> float:
        """One-direction loss with independent per-link Bernoulli drops."""
        keep = 1.0
        for p in self.props:
            keep *= 1.0 - p.loss_pct / 100.0
        return 1.0 - keep

    @property
    def bottleneck_mbps(self) -> float:
        return min((p.rate_mbps for p in self.props), default=math.inf)

    def ground_links(self) -> list[LinkKey]:
        return [k for k in self.keys if is_ground_node(k[0]) or is_ground_node(k[1])]


def _graph(g) -> NetGraph:
    return g if isinstance(g, NetGraph) else g.graph


def _dijkstra(g: NetGraph, src: str, dst: str) -> tuple[int, tuple[str, ...]] | None:
    # keys are (delay, node sequence): ties resolve to the lexicographically smallest path
    best = {src: (0, (src,))}
    heap = [(0, (src,))]
    done = set()
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == dst:
            return d, path
        for v, props in g.neighbors(u).items():
            if v in done or g.nodes.get(v) is not NodeState.STARTED:
                continue
            cand = (d + props.delay_us, path + (v,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, cand)
    return None


def shortest_path(g, src: str, dst: str) -> Route | None:
    """Minimum total delay route, or None when ``dst`` is unreachable.

    Equal-delay routes resolve to the lexicographically smallest node
    sequence. In star mode the delay is still that of the best constellation
    path but the packet is shown as crossing only the hub (2 hops).
    """
    graph = _graph(g)
    with graph.lock:
        for n in (src, dst):
            if n not in graph.nodes:
                raise KeyError(f"unknown node {n}")
        cache = graph.route_cache
        if cache.get("version") != graph.version:
            cache.clear()
            cache["version"] = graph.version
        ck = (src, dst)
        if ck in cache:
            return cache[ck]
        route = _route(graph, src, dst)
        cache[ck] = route
        return route


def _route(graph: NetGraph, src: str, dst: str) -> Route | None:
    if src == dst:
        return Route((src,), 0, (), ())
    found = _dijkstra(graph, src, dst)
    if found is None:
        return None
    delay, path = found
    keys = tuple((a, b) if a <= b else (b, a) for a, b in zip(path, path[1:]))
    props = tuple(graph.links[k] for k in keys)
    if graph.mode == "star":
        return Route((src, HUB, dst), delay, keys, props)
    return Route(path, delay, keys, props)


@dataclass(frozen=True)
class Sample:
    t_offset_s: float
    value: float
    hops: int


@dataclass
class MeasurementRecord:
    kind: str
    src: str
    dst: str
    t_start: float
    unit: str
    requested: int
    samples: list[Sample] = field(default_factory=list)
    lost: int = 0

    @property
    def loss_pct(self) -> float:
        return 100.0 * self.lost / self.requested if self.requested else 0.0

    @property
    def values(self) -> list[float]:
        return [s.value for s in self.samples]

    @property
    def path_hops(self) -> list[int]:
        return [s.hops for s in self.samples]

    def rows(self) -> Iterable[tuple]:
        for s in self.samples:
            yield (self.kind, f"{s.t_offset_s:.3f}", _fmt(s.value), self.unit, s.hops)


def _fmt(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.6f}"


MEASUREMENT_COLUMNS = ("kind", "t_offset_s", "value", "unit", "hops")


def write_measurements_csv(records: Iterable[MeasurementRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASUREMENT_COLUMNS)
        for rec in records:
            w.writerows(rec.rows())


def sim_ping(
    g,
    src: str,
    dst: str,
    count: int = 250,
    interval_s: float = 0.1,
    seed: int = 0,
    *,
    t_start: float = 0.0,
    per_hop_processing_us: int = DEFAULT_PER_HOP_PROCESSING_US,
    advance: Callable[[float], None] | None = None,
) -> MeasurementRecord:
    """Echo probes against the live graph.

    Probe ``i`` goes out at ``t_start + i*interval_s``; ``advance`` (if
    given) is called with that time first so a trace replayer can bring the
    network up to date. RTT = 2*(path delay + hops*per-hop processing).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    rec = MeasurementRecord("ping", src, dst, t_start, "us", count)
    for i in range(count):
        t = round(t_start + i * interval_s, 6)
        if advance is not None:
            advance(t)
        route = shortest_path(g, src, dst)
        # two draws per probe regardless of outcome keep the stream aligned
        fwd, back = rng.random(), rng.random()
        if route is None:
            rec.lost += 1
            continue
        p = route.loss_fraction
        if fwd < p or back < p:
            rec.lost += 1
            continue
        rtt = 2 * (route.delay_us + route.hops * per_hop_processing_us)
        rec.samples.append(Sample(t, rtt, route.hops))
    return rec


def equal_share(rate_mbps: float, sessions: int) -> float:
    return rate_mbps / sessions


@dataclass(frozen=True)
class Session:
    src: str
    dst: str
    target_mbps: float
    direction: str = "uplink"

    def route(self, g) -> Route | None:
        if self.direction == "downlink":
            return shortest_path(g, self.dst, self.src)
        return shortest_path(g, self.src, self.dst)


def sim_throughput(
    g,
    src: str,
    dst: str,
    target_mbps: float,
    duration_s: float,
    direction: str = "uplink",
    *,
    t_start: float = 0.0,
    interval_s: float = 1.0,
    contention: bool = False,
    peers: Sequence[tuple[str, str, str]] = (),
    share_policy: Callable[[float, int], float] = equal_share,
    advance: Callable[[float], None] | None = None,
) -> MeasurementRecord:
    """Per-interval goodput of a rate-capped session, no congestion control.

    goodput = min(target, bottleneck rate, contended GSL share) * (1 - path loss).
    ``peers`` lists concurrent sessions as (src, dst, direction); with
    ``contention`` on, every GSL is split among the sessions crossing it
    according to ``share_policy``.
    """
    sessions = [Session(src, dst, target_mbps, direction)]
    sessions += [Session(a, b, math.inf, d) for a, b, d in peers]
    return sim_throughput_group(
        g, sessions, duration_s, t_start=t_start, interval_s=interval_s,
        contention=contention, share_policy=share_policy, advance=advance,
    )[0]


def sim_throughput_group(
    g,
    sessions: Sequence[Session],
    duration_s: float,
    *,
    t_start: float = 0.0,
    interval_s: float = 1.0,
    contention: bool = False,
    share_policy: Callable[[float, int], float] = equal_share,
    advance: Callable[[float], None] | None = None,
) -> list[MeasurementRecord]:
    """Run simultaneous sessions; every interval sees one consistent graph state."""
    for s in sessions:
        if s.target_mbps <= 0:
            raise ValueError("target_mbps must be positive")
        if s.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
    intervals = max(1, int(round(duration_s / interval_s)))
    records = [MeasurementRecord("throughput", s.src, s.dst, t_start, "Mbps", intervals) for s in sessions]
    for i in range(intervals):
        t = round(t_start + i * interval_s, 6)
        if advance is not None:
            advance(t)
        routes = [s.route(g) for s in sessions]
        usage: dict[LinkKey, int] = {}
        for r in routes:
            for key in (r.ground_links() if r is not None else ()):
                usage[key] = usage.get(key, 0) + 1
        for s, r, rec in zip(sessions, routes, records):
            if r is None:
                rec.samples.append(Sample(t, 0.0, 0))
                continue
            rate = min(s.target_mbps, r.bottleneck_mbps)
            if contention:
                for key, props in zip(r.keys, r.props):
                    if key in usage:
                        rate = min(rate, share_policy(props.rate_mbps, usage[key]))
            rec.samples.append(Sample(t, rate * (1.0 - r.loss_fraction), r.hops))
    return records
