"""CPU accounting split into user and kernel time, sampled with psutil."""
from __future__ import annotations

import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import psutil


@dataclass(frozen=True)
class CpuSample:
    t_wall: float
    user_pct: float
    kernel_pct: float  # system + irq + softirq + iowait

    @property
    def total_pct(self) -> float:
        return self.user_pct + self.kernel_pct


@dataclass
class CpuSeries:
    samples: list[CpuSample] = field(default_factory=list)
    supported: bool = True
    truncated: bool = False
    reason: str | None = None

    def __iter__(self):
        return iter(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def mean(self) -> tuple[float, float]:
        if not self.samples:
            return 0.0, 0.0
        n = len(self.samples)
        return sum(s.user_pct for s in self.samples) / n, sum(s.kernel_pct for s in self.samples) / n


def _kernel_seconds(t) -> float:
    return sum(getattr(t, name, 0.0) for name in ("system", "irq", "softirq", "iowait"))


def _proc_times(procs: list[psutil.Process]) -> tuple[float, float]:
    user = kernel = 0.0
    for p in procs:
        # an exited child lingers as a zombie until reaped; treat it as gone
        if p.status() == psutil.STATUS_ZOMBIE:
            raise psutil.NoSuchProcess(p.pid)
        t = p.cpu_times()
        user += t.user + getattr(t, "children_user", 0.0)
        kernel += t.system + getattr(t, "children_system", 0.0) + getattr(t, "iowait", 0.0)
    return user, kernel


def sample_cpu(pids: Iterable[int] | None = None, interval_s: float = 1.0,
               duration_s: float = 60.0) -> CpuSeries:
    """Sample CPU use every ``interval_s`` for ``duration_s``.

    With ``pids`` the percentages cover those processes (100 per busy core);
    without, the whole machine. If a watched process exits the series stops
    early and is flagged ``truncated``.
    """
    if interval_s <= 0 or duration_s < 0:
        raise ValueError("interval_s must be positive and duration_s non-negative")
    if not sys.platform.startswith(("linux", "darwin", "win", "freebsd")):
        return CpuSeries(supported=False, reason=f"unsupported platform {sys.platform}")
    series = CpuSeries()
    count = int(duration_s // interval_s)
    if pids is None:
        prev = psutil.cpu_times()
        prev_wall = time.monotonic()
        cores = psutil.cpu_count() or 1
        for _ in range(count):
            time.sleep(interval_s)
            now = psutil.cpu_times()
            wall = time.monotonic()
            span = (wall - prev_wall) * cores
            user = (now.user - prev.user) + (getattr(now, "nice", 0.0) - getattr(prev, "nice", 0.0))
            kernel = _kernel_seconds(now) - _kernel_seconds(prev)
            scale = 100.0 * cores / span if span > 0 else 0.0
            series.samples.append(CpuSample(time.time(), max(0.0, user * scale), max(0.0, kernel * scale)))
            prev, prev_wall = now, wall
        return series

    try:
        procs = [psutil.Process(pid) for pid in pids]
        prev = _proc_times(procs)
    except psutil.NoSuchProcess as exc:
        return CpuSeries(truncated=True, reason=f"process {exc.pid} not running")
    except psutil.AccessDenied as exc:
        return CpuSeries(supported=False, reason=f"no access to process {exc.pid}")
    prev_wall = time.monotonic()
    for _ in range(count):
        time.sleep(interval_s)
        try:
            now = _proc_times(procs)
        except psutil.NoSuchProcess as exc:
            series.truncated = True
            series.reason = f"process {exc.pid} exited"
            break
        wall = time.monotonic()
        span = wall - prev_wall
        series.samples.append(CpuSample(
            time.time(),
            100.0 * max(0.0, now[0] - prev[0]) / span,
            100.0 * max(0.0, now[1] - prev[1]) / span,
        ))
        prev, prev_wall = now, wall
    return series


CPU_COLUMNS = ("t_wall", "user_pct", "kernel_pct")


def write_cpu_csv(series: CpuSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CPU_COLUMNS)
        for s in series.samples:
            w.writerow([f"{s.t_wall:.3f}", f"{s.user_pct:.2f}", f"{s.kernel_pct:.2f}"])
