"""Time, coordinate and link-geometry helpers.

Everything here assumes a spherical Earth of radius ``R_EARTH_M``. Satellites
and ground stations are placed in the same frame, so the absolute alignment
error of the simplified sidereal-time model cancels out of every delay.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

R_EARTH_M = 6_371_000.0
C_M_S = 299_792_458.0
OMEGA_EARTH_RAD_S = 7.2921159e-5
TWO_PI = 2.0 * math.pi

_J2000 = datetime(2000, 1, 1, 12, 0, 0, tzinfo=timezone.utc)
# Linear sidereal-time polynomial, degrees and degrees/day since J2000.0.
_GMST_AT_J2000_DEG = 280.46061837
_GMST_RATE_DEG_DAY = 360.98564736629


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 timestamp, treating naive values as UTC."""
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    value = datetime.fromisoformat(text)
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def format_utc(value: datetime) -> str:
    value = value.astimezone(timezone.utc)
    if value.microsecond:
        return value.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return value.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class GeodeticCoord:
    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if self.alt_m < -500.0:
            raise ValueError(f"altitude below -500 m: {self.alt_m}")
        object.__setattr__(self, "lon_deg", normalize_lon(self.lon_deg))


def normalize_lon(lon_deg: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    if -180.0 <= lon_deg < 180.0:
        return float(lon_deg)
    wrapped = math.fmod(lon_deg + 180.0, 360.0)
    if wrapped < 0.0:
        wrapped += 360.0
    return wrapped - 180.0


@dataclass(frozen=True)
class EcefPos:
    x_m: float
    y_m: float
    z_m: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x_m, self.y_m, self.z_m)

    def norm(self) -> float:
        return math.sqrt(self.x_m**2 + self.y_m**2 + self.z_m**2)


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class SimInstant:
    """A point in simulated time: an epoch plus an integer-millisecond offset.

    Offsets are kept in milliseconds so that step arithmetic (``epoch + k*step``)
    never accumulates floating point error.
    """

    epoch_utc: datetime
    offset_ms: int = 0

    def __post_init__(self):
        if self.offset_ms < 0:
            raise ValueError("offset must be >= 0")
        if self.epoch_utc.tzinfo is None:
            object.__setattr__(self, "epoch_utc", self.epoch_utc.replace(tzinfo=timezone.utc))

    @classmethod
    def at(cls, epoch: datetime | str, offset_s: float = 0.0) -> "SimInstant":
        if isinstance(epoch, str):
            epoch = parse_utc(epoch)
        return cls(epoch, int(round(offset_s * 1000)))

    @property
    def offset_s(self) -> float:
        return self.offset_ms / 1000.0

    @property
    def utc(self) -> datetime:
        return self.epoch_utc + timedelta(milliseconds=self.offset_ms)

    def plus(self, seconds: float) -> "SimInstant":
        return SimInstant(self.epoch_utc, self.offset_ms + int(round(seconds * 1000)))

    def _key(self) -> int:
        return _epoch_ms(self.epoch_utc) + self.offset_ms

    def __eq__(self, other):
        if not isinstance(other, SimInstant):
            return NotImplemented
        return self._key() == other._key()

    def __lt__(self, other):
        if not isinstance(other, SimInstant):
            return NotImplemented
        return self._key() < other._key()

    def __hash__(self):
        return hash(self._key())


def _epoch_ms(value: datetime) -> int:
    delta = value - _J2000
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def geodetic_to_ecef(g: GeodeticCoord) -> EcefPos:
    lat = math.radians(g.lat_deg)
    lon = math.radians(g.lon_deg)
    r = R_EARTH_M + g.alt_m
    return EcefPos(
        r * math.cos(lat) * math.cos(lon),
        r * math.cos(lat) * math.sin(lon),
        r * math.sin(lat),
    )


def ecef_to_geodetic(p: EcefPos) -> GeodeticCoord:
    x, y, z = p.as_tuple()
    r = math.sqrt(x * x + y * y + z * z)
    lat = math.degrees(math.atan2(z, math.hypot(x, y)))
    lon = math.degrees(math.atan2(y, x))
    return GeodeticCoord(lat, lon, r - R_EARTH_M)


def distance_m(a: EcefPos, b: EcefPos) -> float:
    return math.dist(a.as_tuple(), b.as_tuple())


def elevation_deg(gs: EcefPos, sat: EcefPos) -> float:
    """Elevation of ``sat`` above the local horizon plane at ``gs``."""
    gx, gy, gz = gs.as_tuple()
    dx, dy, dz = sat.x_m - gx, sat.y_m - gy, sat.z_m - gz
    rng = math.sqrt(dx * dx + dy * dy + dz * dz)
    if rng == 0.0:
        return 90.0
    sin_el = (dx * gx + dy * gy + dz * gz) / (rng * gs.norm())
    return math.degrees(math.asin(max(-1.0, min(1.0, sin_el))))


def slant_range_m(altitude_m: float, elevation: float, radius_m: float = R_EARTH_M) -> float:
    """Closed-form ground-to-satellite range for a given elevation in degrees."""
    eps = math.radians(elevation)
    k = (radius_m + altitude_m) / radius_m
    return radius_m * (math.sqrt(k * k - math.cos(eps) ** 2) - math.sin(eps))


def propagation_delay_us(d: float) -> int:
    """One-way free-space delay in whole microseconds, rounding half up."""
    if d < 0:
        raise ValueError("distance must be >= 0")
    return int(math.floor(d / C_M_S * 1e6 + 0.5))


def gmst_rad(when: datetime) -> float:
    """First-order sidereal angle of the prime meridian at ``when``."""
    days = (when - _J2000).total_seconds() / 86_400.0
    deg = _GMST_AT_J2000_DEG + _GMST_RATE_DEG_DAY * days
    return math.radians(deg % 360.0)


def earth_rotation_angle_rad(t: SimInstant) -> float:
    return (gmst_rad(t.epoch_utc) + OMEGA_EARTH_RAD_S * t.offset_s) % TWO_PI
