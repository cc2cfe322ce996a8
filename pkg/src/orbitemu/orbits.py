"""Walker-style shell generation and circular two-body propagation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from fractions import Fraction

import numpy as np

from .geo import (
    R_EARTH_M,
    TWO_PI,
    EcefPos,
    SimInstant,
    earth_rotation_angle_rad,
)

MU_EARTH = 3.986004418e14
DEFAULT_ALTITUDE_KM = 550.0
DEFAULT_NODE_BUDGET = 2000


class BudgetExceeded(ValueError):
    """Raised when a scenario needs more nodes or links than allowed."""


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1_000_000)
    return Fraction(value)


@dataclass(frozen=True)
class ShellConfig:
    planes: int
    sats_per_plane: int
    inclination_deg: float
    altitude_km: float = DEFAULT_ALTITUDE_KM
    raan_arc_rad: float = TWO_PI
    raan_offset_deg: float = 0.0
    phase_offset: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        if self.planes < 1 or self.sats_per_plane < 1:
            raise ValueError("a shell needs at least one plane and one satellite per plane")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ValueError(f"inclination out of range: {self.inclination_deg}")
        if self.altitude_km <= 100.0:
            raise ValueError(f"altitude must exceed 100 km: {self.altitude_km}")
        if not 0.0 < self.raan_arc_rad <= TWO_PI + 1e-12:
            raise ValueError(f"raan_arc_rad must be in (0, 2pi]: {self.raan_arc_rad}")
        if not 0.0 <= self.raan_offset_deg < 360.0:
            raise ValueError(f"raan_offset_deg must be in [0, 360): {self.raan_offset_deg}")
        phase = _as_fraction(self.phase_offset)
        if not 0 <= phase < 1:
            raise ValueError(f"phase_offset must be in [0, 1): {phase}")
        object.__setattr__(self, "phase_offset", phase)

    @property
    def size(self) -> int:
        return self.planes * self.sats_per_plane

    @property
    def full_arc(self) -> bool:
        return math.isclose(self.raan_arc_rad, TWO_PI, rel_tol=0.0, abs_tol=1e-9)

    @property
    def semi_major_axis_m(self) -> float:
        return R_EARTH_M + self.altitude_km * 1000.0

    def to_dict(self) -> dict:
        return {
            "planes": self.planes,
            "sats_per_plane": self.sats_per_plane,
            "inclination_deg": float(self.inclination_deg),
            "altitude_km": float(self.altitude_km),
            "raan_arc_rad": float(self.raan_arc_rad),
            "raan_offset_deg": float(self.raan_offset_deg),
            "phase_offset": str(self.phase_offset),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ShellConfig":
        return cls(
            planes=int(data["planes"]),
            sats_per_plane=int(data["sats_per_plane"]),
            inclination_deg=float(data["inclination_deg"]),
            altitude_km=float(data.get("altitude_km", DEFAULT_ALTITUDE_KM)),
            raan_arc_rad=float(data.get("raan_arc_rad", TWO_PI)),
            raan_offset_deg=float(data.get("raan_offset_deg", 0.0)),
            phase_offset=_as_fraction(data.get("phase_offset", 0)),
        )


@dataclass(frozen=True, order=True)
class SatelliteId:
    shell: int
    plane: int
    slot: int

    @property
    def node_id(self) -> str:
        return f"sat{self.shell}-{self.plane:03d}-{self.slot:03d}"

    @classmethod
    def parse(cls, node_id: str) -> "SatelliteId":
        if not node_id.startswith("sat"):
            raise ValueError(f"not a satellite node id: {node_id!r}")
        shell, plane, slot = node_id[3:].split("-")
        return cls(int(shell), int(plane), int(slot))

    def __str__(self):
        return self.node_id


@dataclass(frozen=True)
class OrbitalElements:
    semi_major_axis_m: float
    inclination_rad: float
    raan_rad: float
    initial_anomaly_rad: float

    @property
    def mean_motion_rad_s(self) -> float:
        return math.sqrt(MU_EARTH / self.semi_major_axis_m**3)

    @property
    def period_s(self) -> float:
        return TWO_PI / self.mean_motion_rad_s


def orbital_period_s(altitude_m: float) -> float:
    a = R_EARTH_M + altitude_m
    return TWO_PI * math.sqrt(a**3 / MU_EARTH)


def generate_shell(cfg: ShellConfig, shell_index: int = 0) -> list[tuple[SatelliteId, OrbitalElements]]:
    """Lay out ``planes x sats_per_plane`` satellites, ordered by (plane, slot).

    Plane RAANs are spread evenly over ``raan_arc_rad`` starting at
    ``raan_offset_deg``; satellites within a plane are evenly spaced and each
    successive plane is shifted by ``phase_offset`` of a slot.
    """
    a = cfg.semi_major_axis_m
    inc = math.radians(cfg.inclination_deg)
    raan0 = math.radians(cfg.raan_offset_deg)
    raan_step = cfg.raan_arc_rad / cfg.planes
    slot_step = TWO_PI / cfg.sats_per_plane
    phase = float(cfg.phase_offset)
    out = []
    for p in range(cfg.planes):
        raan = (raan0 + p * raan_step) % TWO_PI
        for s in range(cfg.sats_per_plane):
            anomaly = (s * slot_step + p * phase * slot_step) % TWO_PI
            out.append((SatelliteId(shell_index, p, s), OrbitalElements(a, inc, raan, anomaly)))
    return out


def propagate(el: OrbitalElements, t: SimInstant) -> EcefPos:
    """ECEF position of a circular orbit at ``t`` (elements referenced to ``t``'s epoch)."""
    u = el.initial_anomaly_rad + el.mean_motion_rad_s * t.offset_s
    cu, su = math.cos(u), math.sin(u)
    co, so = math.cos(el.raan_rad), math.sin(el.raan_rad)
    ci, si = math.cos(el.inclination_rad), math.sin(el.inclination_rad)
    a = el.semi_major_axis_m
    x = a * (co * cu - so * ci * su)
    y = a * (so * cu + co * ci * su)
    z = a * si * su
    theta = earth_rotation_angle_rad(t)
    ct, st = math.cos(theta), math.sin(theta)
    return EcefPos(ct * x + st * y, -st * x + ct * y, z)


class ElementArrays:
    """Column-wise view of many circular orbits for vectorised propagation."""

    def __init__(self, elements: list[OrbitalElements]):
        self.a = np.array([e.semi_major_axis_m for e in elements], dtype=float)
        self.inc = np.array([e.inclination_rad for e in elements], dtype=float)
        self.raan = np.array([e.raan_rad for e in elements], dtype=float)
        self.anomaly0 = np.array([e.initial_anomaly_rad for e in elements], dtype=float)
        self.n = np.sqrt(MU_EARTH / self.a**3)

    def __len__(self):
        return len(self.a)

    def positions(self, t: SimInstant) -> np.ndarray:
        """(N, 3) ECEF positions at ``t``."""
        u = self.anomaly0 + self.n * t.offset_s
        cu, su = np.cos(u), np.sin(u)
        co, so = np.cos(self.raan), np.sin(self.raan)
        ci, si = np.cos(self.inc), np.sin(self.inc)
        x = self.a * (co * cu - so * ci * su)
        y = self.a * (so * cu + co * ci * su)
        z = self.a * si * su
        theta = earth_rotation_angle_rad(t)
        ct, st = math.cos(theta), math.sin(theta)
        return np.column_stack((ct * x + st * y, -st * x + ct * y, z))


def _tle_checksum(line: str) -> int:
    total = 0
    for ch in line:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return total % 10


def _tle_epoch(epoch: datetime) -> str:
    start = datetime(epoch.year, 1, 1, tzinfo=epoch.tzinfo)
    day = (epoch - start).total_seconds() / 86_400.0 + 1.0
    return f"{epoch.year % 100:02d}{day:012.8f}"


def export_tle(
    sat: SatelliteId,
    el: OrbitalElements,
    epoch: datetime,
    catalog_number: int | None = None,
) -> tuple[str, str]:
    """Render circular elements as a two-line element set.

    Drag terms are zero and the argument of perigee is zero, so the TLE mean
    anomaly carries the argument of latitude.
    """
    if catalog_number is None:
        catalog_number = 1 + sat.shell * 10_000 + sat.plane * 100 + sat.slot
    if not 0 < catalog_number < 100_000:
        raise ValueError(f"catalog number does not fit in 5 digits: {catalog_number}")
    intl = f"{epoch.year % 100:02d}{sat.plane + 1:03d}{chr(ord('A') + sat.slot % 26)}"
    body1 = (
        f"1 {catalog_number:05d}U {intl:<8} {_tle_epoch(epoch)} "
        f" .00000000  00000-0  00000-0 0 {1:4d}"
    )
    revs_per_day = el.mean_motion_rad_s * 86_400.0 / TWO_PI
    body2 = (
        f"2 {catalog_number:05d} {math.degrees(el.inclination_rad):8.4f} "
        f"{math.degrees(el.raan_rad) % 360.0:8.4f} 0000000 {0.0:8.4f} "
        f"{math.degrees(el.initial_anomaly_rad) % 360.0:8.4f} {revs_per_day:11.8f}{0:5d}"
    )
    return body1 + str(_tle_checksum(body1)), body2 + str(_tle_checksum(body2))


def parse_tle_elements(line2: str) -> dict:
    """Read inclination, RAAN, eccentricity, anomaly and mean motion from line 2."""
    return {
        "inclination_deg": float(line2[8:16]),
        "raan_deg": float(line2[17:25]),
        "eccentricity": float("0." + line2[26:33]),
        "arg_perigee_deg": float(line2[34:42]),
        "mean_anomaly_deg": float(line2[43:51]),
        "mean_motion_rev_day": float(line2[52:63]),
    }


def tle_checksum_ok(line: str) -> bool:
    return len(line) == 69 and line[68].isdigit() and _tle_checksum(line[:68]) == int(line[68])
