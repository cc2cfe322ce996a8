"""Run a preset's measurement plan against a simulated backend fed from its trace."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..backends.base import Backend
from ..backends.measure import (
    DEFAULT_PER_HOP_PROCESSING_US,
    MeasurementRecord,
    Session,
    shortest_path,
    sim_ping,
    sim_throughput_group,
    write_measurements_csv,
)
from ..backends.simulated import SimulatedBackend
from ..engine import apply_step, bring_up
from ..topology import is_ground_node
from ..trace import TraceFile, precompute
from .presets import ScenarioPreset


@dataclass(frozen=True)
class HandoverEvent:
    step_index: int
    t_offset_s: float
    ground_station: str
    from_sat: str | None
    to_sat: str | None


def handovers(trace: TraceFile) -> list[HandoverEvent]:
    """GSL switches recorded in a trace (step 0 is the initial attachment, not a handover)."""
    out = []
    step = trace.header.step_seconds
    for d in trace.diffs[1:]:
        dropped = {}
        for a, b in d.links_removed:
            if is_ground_node(a) and not is_ground_node(b):
                dropped[a] = b
        added = {}
        for (a, b), _ in d.links_added:
            if is_ground_node(a) and not is_ground_node(b):
                added[a] = b
        for gs in sorted(set(dropped) | set(added)):
            out.append(HandoverEvent(d.step_index, d.step_index * step, gs, dropped.get(gs), added.get(gs)))
    return out


class TraceReplayer:
    """Applies trace steps to a backend as simulated time moves forward.

    ``advance(t)`` applies every step due at or before ``t`` seconds after the
    epoch. Time never moves backwards.
    """

    def __init__(self, trace: TraceFile, backend: Backend, on_step: Callable[[int], None] | None = None):
        self.trace = trace
        self.backend = backend
        self.on_step = on_step
        self.applied = 0
        self.now = 0.0

    def advance(self, t: float) -> None:
        if t < self.now:
            raise ValueError(f"time went backwards: {t} < {self.now}")
        self.now = t
        step = self.trace.header.step_seconds
        due = min(int(math.floor(t / step + 1e-9)), self.trace.header.step_count)
        while self.applied < due:
            self.applied += 1
            apply_step(self.backend, self.trace.diffs[self.applied])
            if self.on_step is not None:
                self.on_step(self.applied)


@dataclass
class FidelityResult:
    preset: str
    records: list[MeasurementRecord]
    handovers: list[HandoverEvent]
    # (step index, RTT in us or None when unreachable, hops) after every applied step
    rtt_timeline: list[tuple[int, int | None, int]] = field(default_factory=list)
    trace: TraceFile | None = None

    def pings(self) -> list[MeasurementRecord]:
        return [r for r in self.records if r.kind == "ping"]

    def throughputs(self) -> list[MeasurementRecord]:
        return [r for r in self.records if r.kind == "throughput"]

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_measurements_csv(self.records, out / "measurements.csv")
        with open(out / "handovers.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step_index", "t_offset_s", "ground_station", "from_sat", "to_sat"])
            for h in self.handovers:
                w.writerow([h.step_index, f"{h.t_offset_s:.3f}", h.ground_station, h.from_sat or "", h.to_sat or ""])
        with open(out / "rtt_timeline.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step_index", "rtt_us", "hops"])
            for k, rtt, hops in self.rtt_timeline:
                w.writerow([k, "" if rtt is None else rtt, hops])


def fidelity_run(
    preset: ScenarioPreset,
    duration_s: float | None = None,
    backend: Backend | None = None,
    *,
    seed: int = 0,
    workers: int = 1,
    trace: TraceFile | None = None,
    per_hop_processing_us: int = DEFAULT_PER_HOP_PROCESSING_US,
) -> FidelityResult:
    """Execute the preset's measurement plan over ``duration_s`` simulated seconds.

    Each cycle runs the throughput sessions (uplink and downlink together)
    and then the ping session. Time is simulated, so an hour-long run takes
    seconds.
    """
    scenario = preset.scenario
    if duration_s is not None:
        scenario = scenario.replace(duration_seconds=duration_s)
    if trace is None:
        trace = precompute(scenario, workers=workers)
    else:
        trace.check_scenario(scenario)
    backend = backend or SimulatedBackend()
    bring_up(trace, backend, scenario=scenario)
    plan = preset.plan
    timeline: list[tuple[int, int | None, int]] = []

    def record_rtt(k: int) -> None:
        route = shortest_path(backend.graph, plan.client, plan.server)
        if route is None:
            timeline.append((k, None, 0))
        else:
            timeline.append((k, 2 * (route.delay_us + route.hops * per_hop_processing_us), route.hops))

    record_rtt(0)
    replayer = TraceReplayer(trace, backend, on_step=record_rtt)
    records: list[MeasurementRecord] = []
    cycle = 0
    while cycle * plan.every_s < scenario.duration_seconds or cycle == 0:
        t0 = cycle * plan.every_s
        t = t0
        if plan.throughput:
            sessions = [
                Session(plan.client, plan.server, plan.uplink_mbps, "uplink"),
                Session(plan.client, plan.server, plan.downlink_mbps, "downlink"),
            ]
            records += sim_throughput_group(
                backend.graph, sessions, plan.throughput_duration_s, t_start=t,
                contention=scenario.gsl_contention, advance=replayer.advance,
            )
            t += plan.throughput_duration_s
        records.append(sim_ping(
            backend.graph, plan.client, plan.server, plan.ping_count, plan.ping_interval_s,
            seed=seed + cycle, t_start=t, per_hop_processing_us=per_hop_processing_us,
            advance=replayer.advance,
        ))
        cycle += 1
    replayer.advance(max(replayer.now, scenario.duration_seconds))
    return FidelityResult(preset.name, records, handovers(trace), timeline, trace)
