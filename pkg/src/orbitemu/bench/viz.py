"""Offline CZML export of satellite tracks and link lifetimes for globe viewers."""
from __future__ import annotations

import json
from pathlib import Path

from ..geo import EcefPos, ecef_to_geodetic, format_utc, parse_utc
from ..scenario import Scenario
from ..topology import Constellation, LinkKey
from ..trace import TraceFile

# The slice of the CZML packet schema this exporter emits.
CZML_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "prefixItems": [{
        "type": "object",
        "required": ["id", "version"],
        "properties": {
            "id": {"const": "document"},
            "version": {"type": "string"},
            "name": {"type": "string"},
            "clock": {
                "type": "object",
                "required": ["interval", "currentTime"],
                "properties": {
                    "interval": {"type": "string"},
                    "currentTime": {"type": "string"},
                    "multiplier": {"type": "number"},
                },
            },
        },
    }],
    "items": {
        "type": "object",
        "required": ["id"],
        "properties": {
            "id": {"type": "string"},
            "name": {"type": "string"},
            "availability": {
                "oneOf": [
                    {"type": "string", "pattern": r"^[^/]+/[^/]+$"},
                    {"type": "array", "items": {"type": "string", "pattern": r"^[^/]+/[^/]+$"}},
                ],
            },
            "position": {
                "type": "object",
                "properties": {
                    "epoch": {"type": "string"},
                    "cartographicDegrees": {"type": "array", "items": {"type": "number"}},
                    "interpolationAlgorithm": {"enum": ["LINEAR", "LAGRANGE", "HERMITE"]},
                    "interpolationDegree": {"type": "integer", "minimum": 1},
                },
            },
            "point": {"type": "object"},
            "billboard": {"type": "object"},
            "polyline": {
                "type": "object",
                "properties": {
                    "positions": {
                        "type": "object",
                        "required": ["references"],
                        "properties": {
                            "references": {"type": "array", "items": {"type": "string"}, "minItems": 2},
                        },
                    },
                },
            },
        },
    },
}


def _interval(start: str, end: str) -> str:
    return f"{start}/{end}"


def _link_lifetimes(trace: TraceFile) -> dict[LinkKey, list[tuple[int, int]]]:
    """Per link, the [first, last] step ranges during which it exists."""
    open_at: dict[LinkKey, int] = {}
    spans: dict[LinkKey, list[tuple[int, int]]] = {}
    last = trace.header.step_count
    for d in trace.diffs:
        for key in d.links_removed:
            spans.setdefault(key, []).append((open_at.pop(key), d.step_index))
        for key, _ in d.links_added:
            open_at[key] = d.step_index
    for key, start in open_at.items():
        spans.setdefault(key, []).append((start, last))
    return spans


def export_viz(trace: TraceFile, scenario: Scenario, sample_every: float | None = None,
               include_links: bool = True) -> list[dict]:
    """Build a CZML document (a list of packets).

    Satellite positions are sampled every ``sample_every`` seconds (default:
    the trace step) as longitude, latitude and height. Links become polylines
    between entity positions, available while they exist in the trace.
    """
    trace.check_scenario(scenario)
    step = trace.header.step_seconds
    sample_every = step if sample_every is None else sample_every
    if sample_every <= 0:
        raise ValueError("sample_every must be positive")
    duration = trace.header.step_count * step
    epoch = parse_utc(trace.header.epoch)
    start = format_utc(epoch)
    end = scenario.instant(trace.header.step_count).utc
    end_s = format_utc(end)

    times = []
    n = 0
    while n * sample_every <= duration + 1e-9:
        times.append(round(n * sample_every, 6))
        n += 1

    con = Constellation.for_scenario(scenario)
    tracks: dict[str, list[float]] = {s: [] for s in con.sat_nodes}
    for t in times:
        xyz = con.arrays.positions(scenario.instant(0).plus(t))
        for node, row in zip(con.sat_nodes, xyz.tolist()):
            g = ecef_to_geodetic(EcefPos(*row))
            tracks[node] += [t, round(g.lon_deg, 6), round(g.lat_deg, 6), round(g.alt_m, 1)]

    doc: list[dict] = [{
        "id": "document",
        "name": f"constellation {trace.header.scenario_digest[:12]}",
        "version": "1.0",
        "clock": {"interval": _interval(start, end_s), "currentTime": start, "multiplier": 60},
    }]
    for gs in scenario.ground_stations:
        loc = gs.location
        doc.append({
            "id": gs.node_id,
            "name": gs.name,
            "position": {"cartographicDegrees": [loc.lon_deg, loc.lat_deg, loc.alt_m]},
            "point": {"pixelSize": 8, "color": {"rgba": [255, 200, 0, 255]}},
        })
    for node in con.sat_nodes:
        doc.append({
            "id": node,
            "availability": _interval(start, end_s),
            "position": {
                "epoch": start,
                "cartographicDegrees": tracks[node],
                "interpolationAlgorithm": "LAGRANGE",
                "interpolationDegree": 5,
            },
            "point": {"pixelSize": 3, "color": {"rgba": [255, 255, 255, 255]}},
        })
    if include_links:
        for (a, b), spans in sorted(_link_lifetimes(trace).items()):
            doc.append({
                "id": f"link/{a}/{b}",
                "availability": [
                    _interval(format_utc(scenario.instant(s).utc), format_utc(scenario.instant(e).utc))
                    for s, e in spans
                ],
                "polyline": {
                    "positions": {"references": [f"{a}#position", f"{b}#position"]},
                    "width": 1,
                },
            })
    return doc


def write_viz(doc: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
