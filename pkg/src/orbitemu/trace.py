"""Offline precomputation of per-step topology deltas and the trace file format.

A trace is a JSON-lines file: one header record, then one record per step.
Step 0 is the full build (a diff from the empty network); step ``k`` turns the
state at ``k-1`` into the state at ``k``.
"""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .orbits import DEFAULT_NODE_BUDGET, BudgetExceeded
from .scenario import Scenario, canonical_dumps
from .topology import (
    LinkKey,
    LinkProps,
    NodeState,
    TopologySnapshot,
    isl_pairs,
    resolve_sticky,
    snapshot,
)

FORMAT_VERSION = 1
DEFAULT_DELAY_QUANTUM_US = 50
DEFAULT_LINK_BUDGET = 20_000

log = logging.getLogger(__name__)


class TraceError(ValueError):
    def __init__(self, message: str, step_index: int | None = None):
        if step_index is not None:
            message = f"step {step_index}: {message}"
        super().__init__(message)
        self.step_index = step_index


@dataclass
class StepDiff:
    step_index: int
    node_transitions: list[tuple[str, NodeState]] = field(default_factory=list)
    links_added: list[tuple[LinkKey, LinkProps]] = field(default_factory=list)
    links_removed: list[LinkKey] = field(default_factory=list)
    props_changed: list[tuple[LinkKey, LinkProps]] = field(default_factory=list)

    @property
    def link_op_count(self) -> int:
        return len(self.links_added) + len(self.links_removed) + len(self.props_changed)

    @property
    def op_count(self) -> int:
        return len(self.node_transitions) + self.link_op_count

    def is_empty(self) -> bool:
        return self.op_count == 0

    def to_record(self) -> dict:
        return {
            "type": "step",
            "step": self.step_index,
            "nodes": [[n, s.value] for n, s in self.node_transitions],
            "add": [[a, b, *p.as_list()] for (a, b), p in self.links_added],
            "del": [[a, b] for a, b in self.links_removed],
            "upd": [[a, b, *p.as_list()] for (a, b), p in self.props_changed],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "StepDiff":
        def props(row):
            a, b, delay, loss, rate = row
            if not isinstance(delay, int):
                raise ValueError("delay must be an integer number of microseconds")
            return (a, b), LinkProps(delay, float(loss), float(rate))

        return cls(
            step_index=int(rec["step"]),
            node_transitions=[(n, NodeState(s)) for n, s in rec["nodes"]],
            links_added=[props(r) for r in rec["add"]],
            links_removed=[(a, b) for a, b in rec["del"]],
            props_changed=[props(r) for r in rec["upd"]],
        )


@dataclass
class NetworkState:
    """The replayed network: node states and current link properties."""

    nodes: dict[str, NodeState] = field(default_factory=dict)
    links: dict[LinkKey, LinkProps] = field(default_factory=dict)

    @classmethod
    def from_snapshot(cls, snap: TopologySnapshot) -> "NetworkState":
        return cls(dict(snap.nodes), snap.links)

    def copy(self) -> "NetworkState":
        return NetworkState(dict(self.nodes), dict(self.links))


def diff(a: NetworkState | TopologySnapshot, b: NetworkState | TopologySnapshot,
         step_index: int = 0, delay_quantum_us: int = 0) -> StepDiff:
    """Minimal delta from ``a`` to ``b``.

    A persisting link whose loss and rate are unchanged is only reported when
    its delay moved by at least ``delay_quantum_us`` (any change when 0).
    """
    a_nodes, a_links = _parts(a)
    b_nodes, b_links = _parts(b)
    out = StepDiff(step_index)
    for node in sorted(b_nodes):
        if a_nodes.get(node) != b_nodes[node]:
            out.node_transitions.append((node, b_nodes[node]))
    for key in sorted(b_links):
        new = b_links[key]
        old = a_links.get(key)
        if old is None:
            out.links_added.append((key, new))
        elif old != new:
            if old.loss_pct != new.loss_pct or old.rate_mbps != new.rate_mbps:
                out.props_changed.append((key, new))
            elif abs(new.delay_us - old.delay_us) >= max(delay_quantum_us, 1):
                out.props_changed.append((key, new))
    out.links_removed = sorted(k for k in a_links if k not in b_links)
    return out


def _parts(x: NetworkState | TopologySnapshot) -> tuple[dict, dict]:
    return x.nodes, x.links


def apply_diff(state: NetworkState, d: StepDiff) -> NetworkState:
    """Return the state after applying ``d``; raises TraceError on inconsistency."""
    out = state.copy()
    seen: set[LinkKey] = set()
    for key in d.links_removed:
        if key in seen:
            raise TraceError(f"link {key} appears twice", d.step_index)
        seen.add(key)
        if key not in out.links:
            raise TraceError(f"removal of absent link {key}", d.step_index)
        del out.links[key]
    for node, st in d.node_transitions:
        out.nodes[node] = st
    for key, props in d.links_added:
        if key in seen:
            raise TraceError(f"link {key} appears twice", d.step_index)
        seen.add(key)
        if key in out.links:
            raise TraceError(f"addition of existing link {key}", d.step_index)
        out.links[key] = props
    for key, props in d.props_changed:
        if key in seen:
            raise TraceError(f"link {key} appears twice", d.step_index)
        seen.add(key)
        if key not in out.links:
            raise TraceError(f"update of absent link {key}", d.step_index)
        out.links[key] = props
    for (a, b) in out.links:
        if out.nodes.get(a) is not NodeState.STARTED or out.nodes.get(b) is not NodeState.STARTED:
            raise TraceError(f"link {(a, b)} has an endpoint that is not started", d.step_index)
    return out


def replay(diffs: Iterable[StepDiff], state: NetworkState | None = None) -> Iterator[NetworkState]:
    """Yield the state after each diff."""
    state = state or NetworkState()
    for d in diffs:
        state = apply_diff(state, d)
        yield state


@dataclass(frozen=True)
class TraceHeader:
    scenario_digest: str
    epoch: str
    step_seconds: float
    step_count: int
    delay_quantum_us: int = DEFAULT_DELAY_QUANTUM_US
    format_version: int = FORMAT_VERSION

    def to_record(self) -> dict:
        return {
            "type": "header",
            "format_version": self.format_version,
            "scenario_digest": self.scenario_digest,
            "epoch": self.epoch,
            "step_seconds": self.step_seconds,
            "step_count": self.step_count,
            "delay_quantum_us": self.delay_quantum_us,
        }


@dataclass
class TraceFile:
    header: TraceHeader
    diffs: list[StepDiff]

    def lines(self) -> Iterator[str]:
        yield canonical_dumps(self.header.to_record())
        for d in self.diffs:
            yield canonical_dumps(d.to_record())

    def to_text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def states(self) -> Iterator[NetworkState]:
        return replay(self.diffs)

    def check_scenario(self, scenario: Scenario) -> None:
        if self.header.scenario_digest != scenario.digest():
            raise TraceError(
                f"digest mismatch: trace {self.header.scenario_digest[:12]} "
                f"vs scenario {scenario.digest()[:12]}"
            )


def _snapshot_task(args) -> TopologySnapshot:
    scenario, k = args
    snap = snapshot(scenario, scenario.instant(k))
    # positions are not needed downstream and dominate pickling cost
    snap.positions = {}
    return snap


def snapshots_in_order(scenario: Scenario, workers: int = 1, chunksize: int | None = None) -> Iterator[TopologySnapshot]:
    """Evaluate every step's snapshot, in parallel when ``workers > 1``.

    Sticky ground stations are resolved sequentially afterwards, so the result
    does not depend on ``workers``.
    """
    steps = range(scenario.step_count + 1)
    previous: dict[str, str | None] = {}

    def finish(snap: TopologySnapshot) -> TopologySnapshot:
        nonlocal previous
        snap = resolve_sticky(scenario, snap, previous)
        previous = {gs: snap.gsl_of(gs) for gs in snap.visible}
        return snap

    if workers <= 1:
        for k in steps:
            yield finish(_snapshot_task((scenario, k)))
        return
    if chunksize is None:
        chunksize = max(1, len(steps) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for snap in pool.map(_snapshot_task, ((scenario, k) for k in steps), chunksize=chunksize):
            yield finish(snap)


def max_link_count(scenario: Scenario) -> int:
    return sum(len(isl_pairs(s, i)) for i, s in enumerate(scenario.shells)) + len(scenario.ground_stations)


def precompute(
    scenario: Scenario,
    workers: int = 1,
    delay_quantum_us: int = DEFAULT_DELAY_QUANTUM_US,
    max_nodes: int = DEFAULT_NODE_BUDGET,
    max_links: int = DEFAULT_LINK_BUDGET,
    progress: Callable[[int, int], None] | None = None,
) -> TraceFile:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if delay_quantum_us < 0:
        raise ValueError("delay_quantum_us must be >= 0")
    scenario.check_budget(max_nodes)
    links = max_link_count(scenario)
    if links > max_links:
        raise BudgetExceeded(f"scenario may need {links} links, budget is {max_links}")

    header = TraceHeader(
        scenario_digest=scenario.digest(),
        epoch=scenario.epoch,
        step_seconds=scenario.step_seconds,
        step_count=scenario.step_count,
        delay_quantum_us=delay_quantum_us,
    )
    state = NetworkState()
    diffs = []
    total = scenario.step_count + 1
    for k, snap in enumerate(snapshots_in_order(scenario, workers)):
        d = diff(state, snap, k, delay_quantum_us)
        state = apply_diff(state, d)
        diffs.append(d)
        if progress is not None:
            progress(k + 1, total)
    return TraceFile(header, diffs)


def write_trace(trace: TraceFile, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for line in trace.lines():
            fh.write(line)
            fh.write("\n")
    os.replace(tmp, path)


def read_trace(path: str | Path, scenario: Scenario | None = None) -> TraceFile:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh, scenario)


def parse_trace(lines: Iterable[str], scenario: Scenario | None = None) -> TraceFile:
    it = iter(lines)
    first = next(it, None)
    if first is None:
        raise TraceError("empty trace file")
    try:
        rec = json.loads(first)
        if rec.get("type") != "header":
            raise ValueError("first record is not a header")
        version = rec["format_version"]
        if version != FORMAT_VERSION:
            raise TraceError(f"unsupported format_version {version} (expected {FORMAT_VERSION})")
        header = TraceHeader(
            scenario_digest=rec["scenario_digest"],
            epoch=rec["epoch"],
            step_seconds=rec["step_seconds"],
            step_count=int(rec["step_count"]),
            delay_quantum_us=int(rec["delay_quantum_us"]),
            format_version=version,
        )
    except TraceError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise TraceError(f"bad header: {exc}") from None

    trace = TraceFile(header, [])
    if scenario is not None:
        trace.check_scenario(scenario)
    for expected, line in enumerate(it):
        try:
            rec = json.loads(line)
            if rec.get("type") != "step":
                raise ValueError(f"unexpected record type {rec.get('type')!r}")
            d = StepDiff.from_record(rec)
        except (ValueError, KeyError, TypeError) as exc:
            raise TraceError(f"corrupt record on line {expected + 2}: {exc}", expected) from None
        if d.step_index != expected:
            raise TraceError(f"out of order record (found step {d.step_index})", expected)
        trace.diffs.append(d)
    if len(trace.diffs) != header.step_count + 1:
        raise TraceError(
            f"truncated body: {len(trace.diffs)} of {header.step_count + 1} step records",
            len(trace.diffs),
        )
    return trace
