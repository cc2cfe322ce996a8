"""Online phase: bring a trace up on a backend and replay it on a wall-clock schedule."""
from __future__ import annotations

import contextlib
import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping

from .backends.base import Backend, BackendError
from .scenario import Scenario
from .topology import NodeState, snapshot
from .trace import DEFAULT_DELAY_QUANTUM_US, NetworkState, StepDiff, TraceFile, apply_diff, diff

log = logging.getLogger(__name__)

Profiles = Mapping[str, str] | Callable[[str], str | None] | str | None


@dataclass
class BringUpReport:
    node_phase_s: float
    network_phase_s: float
    node_count: int
    link_count: int
    error: str | None = None


@dataclass
class StepReport:
    step_index: int
    scheduled_wall: float
    apply_start_wall: float
    apply_end_wall: float
    lag_ms: float
    ops_applied: int
    compute_ms: float = 0.0


class BringUpError(BackendError):
    def __init__(self, message: str, report: BringUpReport):
        super().__init__(message)
        self.report = report


class StepError(BackendError):
    def __init__(self, message: str, step_index: int, reports: list[StepReport]):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index
        self.reports = reports


def _profile_for(profiles: Profiles, node: str) -> str | None:
    if profiles is None or isinstance(profiles, str):
        return profiles
    if callable(profiles):
        return profiles(node)
    return profiles.get(node)


def bring_up(
    trace: TraceFile,
    backend: Backend,
    profiles: Profiles = None,
    scenario: Scenario | None = None,
    workers: int = 1,
    clock: Callable[[], float] = time.perf_counter,
) -> BringUpReport:
    """Create every step-0 node, start the non-suspended ones, then add every step-0 link.

    The two phases are timed separately. On a backend failure the partial
    report travels on the raised :class:`BringUpError` so the caller can clean up.
    """
    if not backend.is_empty():
        raise BackendError("bring_up needs an empty backend")
    if scenario is not None:
        trace.check_scenario(scenario)
    report = BringUpReport(0.0, 0.0, 0, 0)
    if not trace.diffs:
        return report
    first = trace.diffs[0]

    t0 = clock()
    try:
        for node, state in first.node_transitions:
            backend.create_node(node, _profile_for(profiles, node))
            if state is NodeState.STARTED:
                backend.start_node(node)
            report.node_count += 1
    except Exception as exc:
        report.node_phase_s = clock() - t0
        report.error = str(exc)
        raise BringUpError(f"node phase failed: {exc}", report) from exc
    t1 = clock()
    report.node_phase_s = t1 - t0

    try:
        with ThreadPoolExecutor(workers) if workers > 1 else contextlib.nullcontext() as pool:
            _fan_out(backend.add_link, first.links_added, workers, pool)
        report.link_count = len(first.links_added)
    except Exception as exc:
        report.network_phase_s = clock() - t1
        report.error = str(exc)
        raise BringUpError(f"network phase failed: {exc}", report) from exc
    report.network_phase_s = clock() - t1
    return report


def _fan_out(fn, items, workers: int, pool: ThreadPoolExecutor | None = None) -> None:
    if not items:
        return
    if pool is None or workers <= 1:
        for key, *rest in items:
            fn(key, *rest)
        return
    for _ in pool.map(lambda item: fn(*item), items):
        pass


def apply_step(backend: Backend, d: StepDiff, pool: ThreadPoolExecutor | None = None, workers: int = 1) -> int:
    """Apply one diff; link calls fan out across ``pool``, one call per link.

    Removals go first so that suspended nodes have no links left, then node
    transitions, then additions and property updates.
    """
    _fan_out(backend.remove_link, [(k,) for k in d.links_removed], workers, pool)
    for node, state in d.node_transitions:
        current = backend.nodes.get(node)
        if state is NodeState.STARTED:
            if current is None:
                backend.create_node(node)
                backend.start_node(node)
            elif current is NodeState.CREATED:
                backend.start_node(node)
            elif current is NodeState.SUSPENDED:
                backend.resume_node(node)
        elif state is NodeState.SUSPENDED:
            if current is None:
                backend.create_node(node)
            elif current is NodeState.STARTED:
                backend.suspend_node(node)
        elif state is NodeState.CREATED and current is None:
            backend.create_node(node)
    _fan_out(backend.add_link, d.links_added, workers, pool)
    _fan_out(backend.update_link, d.props_changed, workers, pool)
    return d.op_count


def _schedule(
    sources: Iterable[tuple[int, Callable[[], tuple[StepDiff, float]]]],
    backend: Backend,
    step_seconds: float,
    realtime_factor: float,
    parallel_workers: int,
    clock: Callable[[], float],
    sleep: Callable[[float], None],
    on_step: Callable[[StepReport], None] | None,
) -> list[StepReport]:
    if realtime_factor <= 0:
        raise ValueError("realtime_factor must be positive")
    if parallel_workers < 1:
        raise ValueError("parallel_workers must be >= 1")
    asap = math.isinf(realtime_factor)
    slot = step_seconds / realtime_factor
    reports: list[StepReport] = []
    pool = ThreadPoolExecutor(parallel_workers) if parallel_workers > 1 else None
    t0 = clock()
    try:
        for k, produce in sources:
            if asap:
                scheduled = clock()
            else:
                scheduled = t0 + k * slot
                while True:
                    remaining = scheduled - clock()
                    if remaining <= 0:
                        break
                    sleep(remaining)
            start = clock()
            try:
                d, compute_ms = produce()
                ops = apply_step(backend, d, pool, parallel_workers)
            except Exception as exc:
                raise StepError(str(exc), k, reports) from exc
            end = clock()
            lag = 0.0 if asap else (end - scheduled) * 1000.0
            rep = StepReport(k, scheduled, start, end, lag, ops, compute_ms)
            reports.append(rep)
            if lag > slot * 1000.0:
                log.warning("step %d overran its slot: lag %.1f ms", k, lag)
            if on_step is not None:
                on_step(rep)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return reports


def run(
    trace: TraceFile,
    backend: Backend,
    realtime_factor: float = 1.0,
    parallel_workers: int = 1,
    *,
    clock: Callable[[], float] = time.perf_counter,
    sleep: Callable[[float], None] = time.sleep,
    on_step: Callable[[StepReport], None] | None = None,
) -> list[StepReport]:
    """Replay diffs 1..N with diff ``k`` due at ``T0 + k*step/realtime_factor``.

    A late step is applied late rather than skipped; the delay shows up as
    lag. ``realtime_factor=inf`` applies everything back to back and reports
    zero lag.
    """
    step = float(trace.header.step_seconds)
    sources = ((d.step_index, (lambda d=d: (d, 0.0))) for d in trace.diffs[1:])
    return _schedule(sources, backend, step, realtime_factor, parallel_workers, clock, sleep, on_step)


def run_online(
    scenario: Scenario,
    backend: Backend,
    realtime_factor: float = 1.0,
    parallel_workers: int = 1,
    delay_quantum_us: int = DEFAULT_DELAY_QUANTUM_US,
    *,
    clock: Callable[[], float] = time.perf_counter,
    sleep: Callable[[float], None] = time.sleep,
    on_step: Callable[[StepReport], None] | None = None,
) -> list[StepReport]:
    """Like :func:`run` but each step's topology is computed when it is due.

    The compute time lands inside the apply window, so it adds to the lag.
    The backend must already hold the step-0 state.
    """
    state = NetworkState(dict(backend.nodes), dict(backend.links))
    previous: dict[str, str | None] = {}
    for a, b in state.links:
        if a.startswith("gs-"):
            previous[a] = b

    def produce(k: int) -> tuple[StepDiff, float]:
        nonlocal state, previous
        c0 = time.perf_counter()
        snap = snapshot(scenario, scenario.instant(k), previous)
        d = diff(state, snap, k, delay_quantum_us)
        compute_ms = (time.perf_counter() - c0) * 1000.0
        state = apply_diff(state, d)
        previous = {gs: snap.gsl_of(gs) for gs in snap.visible}
        return d, compute_ms

    sources = ((k, (lambda k=k: produce(k))) for k in range(1, scenario.step_count + 1))
    return _schedule(sources, backend, scenario.step_seconds, realtime_factor, parallel_workers, clock, sleep, on_step)


def tear_down(backend: Backend) -> None:
    """Remove every link and node. Safe to call repeatedly; failures are collected."""
    errors = []
    for key in sorted(backend.links):
        try:
            backend.remove_link(key)
        except Exception as exc:  # keep going, report at the end
            errors.append(f"remove_link {key}: {exc}")
    for node in sorted(backend.nodes):
        try:
            backend.destroy_node(node)
        except Exception as exc:
            errors.append(f"destroy_node {node}: {exc}")
    if errors:
        raise BackendError(f"{len(errors)} tear-down failures: " + "; ".join(errors[:5]))


def iter_jsonl(reports: Iterable) -> Iterator[str]:
    for r in reports:
        yield json.dumps(asdict(r), sort_keys=True)


def write_step_reports(reports: list[StepReport], jsonl_path: str | Path, csv_path: str | Path | None = None) -> None:
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for line in iter_jsonl(reports):
            fh.write(line + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step_index", "lag_ms", "ops_applied"])
            for r in reports:
                w.writerow([r.step_index, f"{r.lag_ms:.3f}", r.ops_applied])


def read_step_reports(jsonl_path: str | Path) -> list[StepReport]:
    with open(jsonl_path, encoding="utf-8") as fh:
        return [StepReport(**json.loads(line)) for line in fh if line.strip()]


def percentile(values: list[float], pct: float) -> float:
    """Nearest-rank percentile."""
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]
