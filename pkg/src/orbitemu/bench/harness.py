"""Bring-up and update-lag scaling benchmarks."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ..backends.base import Backend
from ..backends.recording import RecordingBackend
from ..backends.simulated import SimulatedBackend
from ..engine import StepReport, bring_up, percentile, run, run_online, tear_down
from ..orbits import DEFAULT_NODE_BUDGET
from ..trace import DEFAULT_DELAY_QUANTUM_US, precompute
from .presets import STARLINK_SATS_PER_PLANE, sized_scenario

DEFAULT_SIZES = (10, 15, 20)
UPDATE_MODES = ("precomputed", "online")

BackendFactory = Callable[[], Backend]


@dataclass
class BringUpRow:
    planes: int
    sats_per_plane: int
    node_count: int
    link_count: int
    node_phase_s: float
    network_phase_s: float


@dataclass
class UpdateRow:
    planes: int
    mode: str
    steps: int
    p50_lag_ms: float
    p99_lag_ms: float
    max_lag_ms: float
    mean_ops: float
    mean_compute_ms: float


def _check_sizes(sizes: Sequence[int]) -> None:
    if not sizes:
        raise ValueError("sizes must not be empty")
    if any(p < 1 for p in sizes):
        raise ValueError("plane counts must be >= 1")


def bench_bringup(
    sizes: Sequence[int] = DEFAULT_SIZES,
    backend_factory: BackendFactory = RecordingBackend,
    *,
    sats_per_plane: int = STARLINK_SATS_PER_PLANE,
    workers: int = 1,
    max_nodes: int = DEFAULT_NODE_BUDGET,
) -> list[BringUpRow]:
    """Time the node and network phases of bring-up for each plane count."""
    _check_sizes(sizes)
    rows = []
    for planes in sizes:
        scenario = sized_scenario(planes, duration_s=0, sats_per_plane=sats_per_plane)
        trace = precompute(scenario, max_nodes=max_nodes)
        backend = backend_factory()
        try:
            rep = bring_up(trace, backend, scenario=scenario, workers=workers)
        finally:
            tear_down(backend)
            backend.close()
        rows.append(BringUpRow(planes, sats_per_plane, rep.node_count, rep.link_count,
                               rep.node_phase_s, rep.network_phase_s))
    return rows


def summarize_updates(planes: int, mode: str, reports: Sequence[StepReport]) -> UpdateRow:
    """Collapse per-step reports into one row (percentiles by nearest rank)."""
    lags = [r.lag_ms for r in reports]
    n = len(reports) or 1
    return UpdateRow(
        planes=planes,
        mode=mode,
        steps=len(reports),
        p50_lag_ms=percentile(lags, 50),
        p99_lag_ms=percentile(lags, 99),
        max_lag_ms=max(lags, default=0.0),
        mean_ops=sum(r.ops_applied for r in reports) / n,
        mean_compute_ms=sum(r.compute_ms for r in reports) / n,
    )


def bench_updates(
    sizes: Sequence[int] = DEFAULT_SIZES,
    backend_factory: BackendFactory = SimulatedBackend,
    duration_s: float = 3600.0,
    *,
    step_s: float = 5.0,
    realtime_factor: float = 1.0,
    parallel_workers: int = 1,
    mode: str = "precomputed",
    workers: int = 1,
    delay_quantum_us: int = DEFAULT_DELAY_QUANTUM_US,
    max_nodes: int = DEFAULT_NODE_BUDGET,
) -> tuple[list[UpdateRow], dict[int, list[StepReport]]]:
    """Replay each size and measure per-step apply lag.

    ``mode="online"`` computes each snapshot when its step is due instead of
    replaying a trace, so topology computation shows up in the lag.
    Returns the summary rows and the raw reports keyed by plane count.
    """
    _check_sizes(sizes)
    if mode not in UPDATE_MODES:
        raise ValueError(f"mode must be one of {UPDATE_MODES}")
    rows, raw = [], {}
    for planes in sizes:
        scenario = sized_scenario(planes, duration_s=duration_s, step_s=step_s)
        backend = backend_factory()
        try:
            if mode == "precomputed":
                trace = precompute(scenario, workers=workers, delay_quantum_us=delay_quantum_us,
                                   max_nodes=max_nodes)
                bring_up(trace, backend, scenario=scenario)
                reports = run(trace, backend, realtime_factor, parallel_workers)
            else:
                initial = scenario.replace(duration_seconds=0)
                bring_up(precompute(initial, delay_quantum_us=delay_quantum_us, max_nodes=max_nodes), backend)
                reports = run_online(scenario, backend, realtime_factor, parallel_workers, delay_quantum_us)
        finally:
            tear_down(backend)
            backend.close()
        rows.append(summarize_updates(planes, mode, reports))
        raw[planes] = reports
    return rows, raw


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return str(v)


def write_rows_csv(rows: Iterable, path: str | Path) -> None:
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in fields(rows[0])])
        for r in rows:
            w.writerow([_fmt(v) for v in asdict(r).values()])


def write_rows_jsonl(rows: Iterable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def write_update_reports_jsonl(raw: dict[int, list[StepReport]], mode: str, path: str | Path) -> None:
    """Raw per-step reports; :func:`rows_from_reports_jsonl` rebuilds the summary CSV from them."""
    with open(path, "w", encoding="utf-8") as fh:
        for planes, reports in raw.items():
            for r in reports:
                rec = {"planes": planes, "mode": mode, **asdict(r)}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def rows_from_reports_jsonl(path: str | Path) -> list[UpdateRow]:
    grouped: dict[tuple[int, str], list[StepReport]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            key = (rec.pop("planes"), rec.pop("mode"))
            grouped.setdefault(key, []).append(StepReport(**rec))
    return [summarize_updates(p, m, reps) for (p, m), reps in grouped.items()]
