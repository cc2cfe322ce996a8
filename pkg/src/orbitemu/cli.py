"""Command-line entry point: ``orbitemu <command> [flags]``.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 backend error,
5 budget exceeded. Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from . import __version__
from .backends import BACKENDS, BackendError, make_backend
from .bench import (
    PRESETS,
    bench_bringup,
    bench_updates,
    export_viz,
    fidelity_run,
    sample_cpu,
    write_cpu_csv,
    write_rows_csv,
    write_rows_jsonl,
    write_update_reports_jsonl,
    write_viz,
)
from .bench.harness import DEFAULT_SIZES, UPDATE_MODES
from .engine import bring_up, run, run_online, tear_down, write_step_reports
from .orbits import BudgetExceeded
from .scenario import LinkDefaults, ScenarioError, canonical_dumps, load_scenario, save_scenario
from .trace import DEFAULT_DELAY_QUANTUM_US, TraceError, precompute, read_trace, write_trace

log = logging.getLogger("orbitemu")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_BACKEND, EXIT_BUDGET = 0, 2, 3, 4, 5

# Shared flags. Their argparse default is None so that a value coming from
# --config can be told apart from one typed on the command line.
COMMON_DEFAULTS: dict[str, Any] = {
    "scenario": None,
    "trace": None,
    "backend": "simulated",
    "workers": 1,
    "realtime_factor": 1.0,
    "out": None,
    "seed": 0,
    "duration": None,
    "step": None,
}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as exceptions so they share the JSON error path."""

    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return value


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated plane counts: {text}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError("plane counts must be positive")
    return sizes


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", action="append", default=[], metavar="FILE",
                   help="JSON file of option values; later files win, explicit flags win over files")
    g.add_argument("--scenario", metavar="FILE", help="scenario JSON")
    g.add_argument("--trace", metavar="FILE", help="trace JSON-lines file")
    g.add_argument("--backend", choices=BACKENDS)
    g.add_argument("--workers", type=int, metavar="N")
    g.add_argument("--realtime-factor", type=_positive_float, metavar="R",
                   help="simulated seconds per wall second ('inf' replays as fast as possible)")
    g.add_argument("--out", metavar="PATH", help="output file or directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--duration", type=_positive_float, metavar="SECONDS")
    g.add_argument("--step", type=_positive_float, metavar="SECONDS")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="orbitemu", description="Trace-driven LEO constellation emulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="write a preset scenario JSON")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)

    p = sub.add_parser("precompute", parents=[common], help="compute a trace for a scenario")
    p.add_argument("--delay-quantum-us", type=int, default=DEFAULT_DELAY_QUANTUM_US)

    p = sub.add_parser("run", parents=[common], help="bring up a trace on a backend and replay it")
    p.add_argument("--mode", choices=UPDATE_MODES, default="precomputed")
    p.add_argument("--parallel-workers", type=int, default=None,
                   help="threads applying link operations (defaults to --workers)")

    bench = sub.add_parser("bench", help="scaling benchmarks").add_subparsers(dest="bench", required=True)
    p = bench.add_parser("bringup", parents=[common], help="bring-up time per constellation size")
    p.add_argument("--sizes", type=_sizes, default=list(DEFAULT_SIZES), metavar="P1,P2,...")
    p.add_argument("--op-latency-ms", type=float, default=0.0, help="recording backend cost per operation")
    p = bench.add_parser("updates", parents=[common], help="update lag per constellation size")
    p.add_argument("--sizes", type=_sizes, default=list(DEFAULT_SIZES), metavar="P1,P2,...")
    p.add_argument("--mode", choices=UPDATE_MODES, default="precomputed")
    p = bench.add_parser("cpu", parents=[common], help="sample CPU use (user vs kernel)")
    p.add_argument("--pid", type=int, action="append", dest="pids", help="process to watch (repeatable)")
    p.add_argument("--interval", type=_positive_float, default=1.0)

    fid = sub.add_parser("fidelity", help="measurement scenarios").add_subparsers(dest="preset", required=True)
    for name in sorted(PRESETS):
        p = fid.add_parser(name, parents=[common], help=f"run the {name} measurement plan")
        p.add_argument("--topology", choices=("grid", "star"), default="grid")
        p.add_argument("--lossless", action="store_true", help="zero loss on every link")

    p = sub.add_parser("export-viz", parents=[common], help="write a CZML view of a trace")
    p.add_argument("--sample-every", type=_positive_float, default=None, metavar="SECONDS")

    sub.add_parser("validate", parents=[common], help="check a scenario and, optionally, a trace against it")
    return parser


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset shared flags from --config files, then from built-in defaults."""
    merged: dict[str, Any] = {}
    for path in args.config:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise CliError(f"{path}: config must be a JSON object")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in COMMON_DEFAULTS:
                raise CliError(f"{path}: unknown option {key!r}")
            merged[key] = value
    for key, default in COMMON_DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, merged.get(key, default))
    if args.workers < 1:
        raise CliError("--workers must be >= 1")
    if args.backend not in BACKENDS:
        raise CliError(f"unknown backend {args.backend!r}")
    args.realtime_factor = float(args.realtime_factor)
    if not args.realtime_factor > 0:
        raise CliError("--realtime-factor must be positive")
    return args


def _need(args, *names: str) -> None:
    missing = [n for n in names if not getattr(args, n)]
    if missing:
        raise CliError(f"{args.command}: missing --{', --'.join(m.replace('_', '-') for m in missing)}")


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _progress(done: int, total: int) -> None:
    if done == total or done % max(1, total // 20) == 0:
        print(f"\r{done}/{total} steps", end="\n" if done == total else "", file=sys.stderr, flush=True)


def _backend(args):
    if args.backend == "recording":
        return make_backend("recording", seed=args.seed)
    return make_backend(args.backend)


def cmd_gen(args) -> None:
    changes = {}
    if args.duration is not None:
        changes["duration_s"] = args.duration
    preset = PRESETS[args.preset](**changes)
    scenario = preset.scenario
    if args.step is not None:
        scenario = scenario.replace(step_seconds=args.step)
    for note in preset.notes:
        log.info("%s: %s", preset.name, note)
    if args.out:
        save_scenario(scenario, args.out)
    else:
        sys.stdout.write(json.dumps(scenario.to_dict(), sort_keys=True, indent=2) + "\n")


def cmd_precompute(args) -> None:
    _need(args, "scenario", "out")
    scenario = load_scenario(args.scenario)
    trace = precompute(scenario, workers=args.workers, delay_quantum_us=args.delay_quantum_us,
                       progress=_progress)
    write_trace(trace, args.out)


def cmd_run(args) -> None:
    _need(args, "scenario", "trace")
    scenario = load_scenario(args.scenario)
    trace = read_trace(args.trace, scenario)
    out = _out_dir(args, "run-out")
    workers = args.parallel_workers or args.workers
    backend = _backend(args)
    try:
        report = bring_up(trace, backend, scenario=scenario, workers=workers)
        (out / "bringup.json").write_text(canonical_dumps(vars(report)) + "\n", encoding="utf-8")
        if args.mode == "online":
            reports = run_online(scenario, backend, args.realtime_factor, workers, trace.header.delay_quantum_us)
        else:
            reports = run(trace, backend, args.realtime_factor, workers)
        write_step_reports(reports, out / "step_reports.jsonl", out / "step_reports.csv")
    finally:
        tear_down(backend)
        backend.close()


def cmd_bench(args) -> None:
    if args.bench == "bringup":
        out = _out_dir(args, "bench-out")

        def factory():
            if args.backend == "recording":
                return make_backend("recording", latency_s=args.op_latency_ms / 1000.0, seed=args.seed)
            return make_backend(args.backend)

        rows = bench_bringup(args.sizes, factory, workers=args.workers)
        write_rows_csv(rows, out / "bringup.csv")
        write_rows_jsonl(rows, out / "bringup.jsonl")
    elif args.bench == "updates":
        out = _out_dir(args, "bench-out")
        rows, raw = bench_updates(
            args.sizes, lambda: _backend(args), args.duration or 3600.0,
            step_s=args.step or 5.0, realtime_factor=args.realtime_factor,
            parallel_workers=args.workers, mode=args.mode,
        )
        write_rows_csv(rows, out / f"updates_{args.mode}.csv")
        write_update_reports_jsonl(raw, args.mode, out / f"updates_{args.mode}.jsonl")
    else:
        out = _out_dir(args, "bench-out")
        series = sample_cpu(args.pids, args.interval, args.duration or 60.0)
        if not series.supported:
            raise CliError(f"cpu sampling unsupported: {series.reason}", EXIT_BACKEND)
        if series.truncated:
            log.warning("cpu series truncated: %s", series.reason)
        write_cpu_csv(series, out / "cpu.csv")


def cmd_fidelity(args) -> None:
    if args.backend != "simulated":
        raise CliError("fidelity runs need --backend simulated")
    preset = PRESETS[args.preset](**({"link_defaults": LinkDefaults.lossless()} if args.lossless else {}))
    if args.step is not None:
        preset = type(preset)(preset.name, preset.scenario.replace(step_seconds=args.step), preset.plan, preset.notes)
    trace = None
    if args.trace:
        duration = args.duration or preset.scenario.duration_seconds
        trace = read_trace(args.trace, preset.scenario.replace(duration_seconds=duration))
    result = fidelity_run(preset, args.duration, make_backend("simulated", mode=args.topology),
                          seed=args.seed, workers=args.workers, trace=trace)
    out = _out_dir(args, f"fidelity-{args.preset}")
    result.write(out)
    hops = [h for rec in result.pings() for h in rec.path_hops]
    rtts = [v for rec in result.pings() for v in rec.values]
    summary = {
        "preset": result.preset,
        "topology": args.topology,
        "handovers": len(result.handovers),
        "ping_samples": len(rtts),
        "rtt_ms_min": min(rtts) / 1000.0 if rtts else None,
        "rtt_ms_max": max(rtts) / 1000.0 if rtts else None,
        "hops_min": min(hops) if hops else None,
        "hops_max": max(hops) if hops else None,
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary, sort_keys=True))


def cmd_export_viz(args) -> None:
    _need(args, "scenario", "trace", "out")
    scenario = load_scenario(args.scenario)
    doc = export_viz(read_trace(args.trace, scenario), scenario, args.sample_every)
    write_viz(doc, args.out)


def cmd_validate(args) -> None:
    _need(args, "scenario")
    scenario = load_scenario(args.scenario)
    result = {"scenario": "ok", "digest": scenario.digest()}
    if args.trace:
        read_trace(args.trace, scenario)
        result["trace"] = "ok"
    print(json.dumps(result, sort_keys=True))


COMMANDS = {
    "gen": cmd_gen,
    "precompute": cmd_precompute,
    "run": cmd_run,
    "bench": cmd_bench,
    "fidelity": cmd_fidelity,
    "export-viz": cmd_export_viz,
    "validate": cmd_validate,
}


def _classify(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, CliError):
        return exc.code, "config"
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET, "budget"
    if isinstance(exc, BackendError):
        return EXIT_BACKEND, "backend"
    if isinstance(exc, (ScenarioError, TraceError, jsonschema.ValidationError, ValueError)):
        return EXIT_CONFIG, "config"
    if isinstance(exc, OSError):
        return EXIT_IO, "io"
    raise exc


def main(argv: Sequence[str] | None = None) -> int:
    level = getattr(logging, os.environ.get("ORBIT_LOG", "WARNING").upper(), None)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        resolve(args)
        COMMANDS[args.command](args)
    except Exception as exc:
        code, kind = _classify(exc)
        print(json.dumps({"error": kind, "exit_code": code, "message": str(exc)}), file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
