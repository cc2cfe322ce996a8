"""Scenario documents: loading, validation, canonical form and digest."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .geo import GeodeticCoord, SimInstant, format_utc, parse_utc
from .orbits import DEFAULT_NODE_BUDGET, BudgetExceeded, ShellConfig

GSL_MODES = ("closest", "sticky")


class ScenarioError(ValueError):
    """The scenario document is malformed or inconsistent."""


@dataclass(frozen=True)
class LinkClassDefaults:
    loss_pct: float = 1.0
    rate_mbps: float = 1000.0

    def __post_init__(self):
        if not 0.0 <= self.loss_pct <= 100.0:
            raise ScenarioError(f"loss_pct out of range: {self.loss_pct}")
        if self.rate_mbps <= 0.0:
            raise ScenarioError(f"rate_mbps must be positive: {self.rate_mbps}")


@dataclass(frozen=True)
class LinkDefaults:
    gsl: LinkClassDefaults = LinkClassDefaults(1.0, 1000.0)
    isl: LinkClassDefaults = LinkClassDefaults(1.0, 10_000.0)

    @classmethod
    def opensn(cls) -> "LinkDefaults":
        """Every link at 1.5% loss."""
        return cls(LinkClassDefaults(1.5, 1000.0), LinkClassDefaults(1.5, 10_000.0))

    @classmethod
    def lossless(cls) -> "LinkDefaults":
        return cls(LinkClassDefaults(0.0, 1000.0), LinkClassDefaults(0.0, 10_000.0))


@dataclass(frozen=True)
class GroundStationConfig:
    name: str
    location: GeodeticCoord
    min_elevation_deg: float = 25.0
    gsl_mode: str = "closest"

    def __post_init__(self):
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise ScenarioError(f"min_elevation_deg must be in [0, 90): {self.min_elevation_deg}")
        if self.gsl_mode not in GSL_MODES:
            raise ScenarioError(f"unknown gsl_mode {self.gsl_mode!r}")
        if not self.name:
            raise ScenarioError("ground station name must not be empty")

    @property
    def node_id(self) -> str:
        return f"gs-{self.name}"


@dataclass(frozen=True)
class BoundingBox:
    """Geographic box; ``lon_min > lon_max`` means the box wraps the antimeridian."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if self.lat_min > self.lat_max:
            raise ScenarioError("bounding box lat_min > lat_max")

    def contains(self, lat_deg, lon_deg):
        """Works element-wise on numpy arrays as well as on scalars."""
        lat_ok = (lat_deg >= self.lat_min) & (lat_deg <= self.lat_max)
        if self.lon_min <= self.lon_max:
            lon_ok = (lon_deg >= self.lon_min) & (lon_deg <= self.lon_max)
        else:
            lon_ok = (lon_deg >= self.lon_min) | (lon_deg <= self.lon_max)
        return np.logical_and(lat_ok, lon_ok)

    @classmethod
    def whole_globe(cls) -> "BoundingBox":
        return cls(-90.0, 90.0, -180.0, 180.0)


@dataclass(frozen=True)
class Scenario:
    epoch: str
    step_seconds: float
    duration_seconds: float
    shells: tuple[ShellConfig, ...]
    ground_stations: tuple[GroundStationConfig, ...] = ()
    link_defaults: LinkDefaults = field(default_factory=LinkDefaults)
    bounding_box: BoundingBox | None = None
    gsl_contention: bool = False

    def __post_init__(self):
        object.__setattr__(self, "epoch", format_utc(parse_utc(self.epoch)))
        object.__setattr__(self, "shells", tuple(self.shells))
        object.__setattr__(self, "ground_stations", tuple(self.ground_stations))
        if self.step_seconds <= 0:
            raise ScenarioError("step_seconds must be positive")
        if self.duration_seconds < 0:
            raise ScenarioError("duration_seconds must be >= 0")
        if round(self.step_seconds * 1000) != self.step_seconds * 1000:
            raise ScenarioError("step_seconds must be a whole number of milliseconds")
        if not self.shells:
            raise ScenarioError("scenario has no shells")
        names = [gs.name for gs in self.ground_stations]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ScenarioError(f"duplicate ground station names: {', '.join(dupes)}")

    @property
    def step_count(self) -> int:
        return int(self.duration_seconds // self.step_seconds)

    @property
    def satellite_count(self) -> int:
        return sum(s.size for s in self.shells)

    @property
    def node_count(self) -> int:
        return self.satellite_count + len(self.ground_stations)

    def instant(self, step_index: int) -> SimInstant:
        return SimInstant.at(self.epoch, step_index * self.step_seconds)

    def check_budget(self, max_nodes: int = DEFAULT_NODE_BUDGET) -> None:
        if self.node_count > max_nodes:
            raise BudgetExceeded(f"scenario has {self.node_count} nodes, budget is {max_nodes}")

    def replace(self, **changes) -> "Scenario":
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data.update(changes)
        return Scenario(**data)

    def to_dict(self) -> dict:
        data = {
            "epoch": self.epoch,
            "step_seconds": float(self.step_seconds),
            "duration_seconds": float(self.duration_seconds),
            "shells": [s.to_dict() for s in self.shells],
            "ground_stations": [
                {
                    "name": gs.name,
                    "lat_deg": float(gs.location.lat_deg),
                    "lon_deg": float(gs.location.lon_deg),
                    "alt_m": float(gs.location.alt_m),
                    "min_elevation_deg": float(gs.min_elevation_deg),
                    "gsl_mode": gs.gsl_mode,
                }
                for gs in self.ground_stations
            ],
            "link_defaults": {
                cls: {"loss_pct": float(d.loss_pct), "rate_mbps": float(d.rate_mbps)}
                for cls, d in (("gsl", self.link_defaults.gsl), ("isl", self.link_defaults.isl))
            },
            "gsl_contention": self.gsl_contention,
        }
        if self.bounding_box is not None:
            bb = self.bounding_box
            data["bounding_box"] = {
                "lat_min": float(bb.lat_min),
                "lat_max": float(bb.lat_max),
                "lon_min": float(bb.lon_min),
                "lon_max": float(bb.lon_max),
            }
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        try:
            jsonschema.validate(data, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"scenario schema error at {where}: {exc.message}") from None
        try:
            ld = data.get("link_defaults", {})
            defaults = LinkDefaults()
            link_defaults = LinkDefaults(
                gsl=LinkClassDefaults(**{**vars(defaults.gsl), **ld.get("gsl", {})}),
                isl=LinkClassDefaults(**{**vars(defaults.isl), **ld.get("isl", {})}),
            )
            bb = data.get("bounding_box")
            return cls(
                epoch=data["epoch"],
                step_seconds=float(data["step_seconds"]),
                duration_seconds=float(data["duration_seconds"]),
                shells=tuple(ShellConfig.from_dict(s) for s in data["shells"]),
                ground_stations=tuple(
                    GroundStationConfig(
                        name=g["name"],
                        location=GeodeticCoord(g["lat_deg"], g["lon_deg"], g.get("alt_m", 0.0)),
                        min_elevation_deg=g.get("min_elevation_deg", 25.0),
                        gsl_mode=g.get("gsl_mode", "closest"),
                    )
                    for g in data.get("ground_stations", [])
                ),
                link_defaults=link_defaults,
                bounding_box=BoundingBox(**bb) if bb is not None else None,
                gsl_contention=bool(data.get("gsl_contention", False)),
            )
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    def canonical_json(self) -> str:
        return canonical_dumps(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def load_scenario(path: str | Path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON: {exc}") from None
    return Scenario.from_dict(data)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


_LINK_CLASS = {
    "type": "object",
    "properties": {
        "loss_pct": {"type": "number", "minimum": 0, "maximum": 100},
        "rate_mbps": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["epoch", "step_seconds", "duration_seconds", "shells"],
    "additionalProperties": False,
    "properties": {
        "epoch": {"type": "string", "minLength": 10},
        "step_seconds": {"type": "number", "exclusiveMinimum": 0},
        "duration_seconds": {"type": "number", "minimum": 0},
        "shells": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["planes", "sats_per_plane", "inclination_deg"],
                "additionalProperties": False,
                "properties": {
                    "planes": {"type": "integer", "minimum": 1},
                    "sats_per_plane": {"type": "integer", "minimum": 1},
                    "inclination_deg": {"type": "number", "minimum": 0, "maximum": 180},
                    "altitude_km": {"type": "number", "exclusiveMinimum": 100},
                    "raan_arc_rad": {"type": "number", "exclusiveMinimum": 0},
                    "raan_offset_deg": {"type": "number", "minimum": 0, "exclusiveMaximum": 360},
                    "phase_offset": {"type": ["string", "number"]},
                },
            },
        },
        "ground_stations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "lat_deg", "lon_deg"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "lat_deg": {"type": "number", "minimum": -90, "maximum": 90},
                    "lon_deg": {"type": "number"},
                    "alt_m": {"type": "number", "minimum": -500},
                    "min_elevation_deg": {"type": "number", "minimum": 0, "exclusiveMaximum": 90},
                    "gsl_mode": {"enum": list(GSL_MODES)},
                },
            },
        },
        "link_defaults": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"gsl": _LINK_CLASS, "isl": _LINK_CLASS},
        },
        "bounding_box": {
            "type": "object",
            "required": ["lat_min", "lat_max", "lon_min", "lon_max"],
            "additionalProperties": False,
            "properties": {
                "lat_min": {"type": "number", "minimum": -90, "maximum": 90},
                "lat_max": {"type": "number", "minimum": -90, "maximum": 90},
                "lon_min": {"type": "number", "minimum": -180, "maximum": 180},
                "lon_max": {"type": "number", "minimum": -180, "maximum": 180},
            },
        },
        "gsl_contention": {"type": "boolean"},
    },
}
