import math
from datetime import datetime, timezone

import mpmath
import pytest
from hypothesis import given, strategies as st

from orbitemu.geo import (
    C_M_S,
    OMEGA_EARTH_RAD_S,
    R_EARTH_M,
    EcefPos,
    GeodeticCoord,
    SimInstant,
    distance_m,
    earth_rotation_angle_rad,
    ecef_to_geodetic,
    elevation_deg,
    format_utc,
    geodetic_to_ecef,
    gmst_rad,
    normalize_lon,
    parse_utc,
    propagation_delay_us,
    slant_range_m,
)

mpmath.mp.dps = 40

lats = st.floats(-89.9, 89.9)
lons = st.floats(-180, 179.999999)
alts = st.floats(-500, 2_000_000)
coords = st.builds(lambda x, y, z: EcefPos(x, y, z), *[st.floats(-1e7, 1e7)] * 3)


def mp_ecef(lat, lon, alt):
    lat, lon = mpmath.radians(lat), mpmath.radians(lon)
    r = mpmath.mpf(R_EARTH_M) + alt
    return (r * mpmath.cos(lat) * mpmath.cos(lon), r * mpmath.cos(lat) * mpmath.sin(lon), r * mpmath.sin(lat))


def test_equator_prime_meridian():
    p = geodetic_to_ecef(GeodeticCoord(0, 0, 0))
    assert p.as_tuple() == pytest.approx((6_371_000, 0, 0), abs=1e-6)


def test_pole_with_altitude():
    p = geodetic_to_ecef(GeodeticCoord(90, 0, 550_000))
    assert p.as_tuple() == pytest.approx((0, 0, 6_921_000), abs=1e-6)


def test_osnabrueck_against_high_precision():
    lat, lon = 52.28375864272186, 8.031676892719231
    p = geodetic_to_ecef(GeodeticCoord(lat, lon))
    ref = mp_ecef(lat, lon, 0)
    for got, want in zip(p.as_tuple(), ref):
        assert got == pytest.approx(float(want), abs=1e-6)


@given(lats, lons, alts)
def test_roundtrip(lat, lon, alt):
    g = ecef_to_geodetic(geodetic_to_ecef(GeodeticCoord(lat, lon, alt)))
    assert math.radians(abs(g.lat_deg - lat)) < 1e-9
    dlon = (g.lon_deg - lon + 180) % 360 - 180
    assert math.radians(abs(dlon)) < 1e-9
    assert abs(g.alt_m - alt) < 1e-3


@given(lats, lons, alts)
def test_ground_norm(lat, lon, alt):
    p = geodetic_to_ecef(GeodeticCoord(lat, lon, alt))
    assert p.norm() == pytest.approx(R_EARTH_M + alt, rel=1e-6)


@pytest.mark.parametrize("kw", [dict(lat_deg=91, lon_deg=0), dict(lat_deg=-90.5, lon_deg=0),
                                dict(lat_deg=0, lon_deg=0, alt_m=-501)])
def test_geodetic_rejects_out_of_range(kw):
    with pytest.raises(ValueError):
        GeodeticCoord(**kw)


@given(st.floats(-1e4, 1e4))
def test_normalize_lon_range_and_idempotent(lon):
    n = normalize_lon(lon)
    assert -180 <= n < 180
    assert normalize_lon(n) == n


def test_normalize_lon_cases():
    assert normalize_lon(180) == -180
    assert normalize_lon(190) == pytest.approx(-170)
    assert GeodeticCoord(0, 540).lon_deg == -180


def test_distance_cases():
    a = EcefPos(6_371_000, 0, 0)
    b = EcefPos(0, 0, 6_921_000)
    assert distance_m(a, a) == 0
    assert distance_m(a, b) == pytest.approx(float(mpmath.sqrt(mpmath.mpf(6_371_000) ** 2 + mpmath.mpf(6_921_000) ** 2)))
    assert distance_m(a, b) == pytest.approx(9.407e6, rel=1e-3)


@given(coords, coords, coords)
def test_distance_metric(a, b, c):
    assert distance_m(a, b) == distance_m(b, a)
    assert distance_m(a, c) <= distance_m(a, b) + distance_m(b, c) + 1e-6
    assert (distance_m(a, b) == 0) == (a.as_tuple() == b.as_tuple())


def test_elevation_zenith_and_antipode():
    gs = geodetic_to_ecef(GeodeticCoord(10, 20))
    up = EcefPos(*(x * 1.1 for x in gs.as_tuple()))
    down = EcefPos(*(-x * 1.1 for x in gs.as_tuple()))
    assert elevation_deg(gs, up) == pytest.approx(90)
    assert elevation_deg(gs, down) < 0


@given(lats, lons, st.floats(1e3, 2e6))
def test_elevation_is_90_radially_outward(lat, lon, h):
    gs = geodetic_to_ecef(GeodeticCoord(lat, lon))
    sat = geodetic_to_ecef(GeodeticCoord(lat, lon, h))
    assert elevation_deg(gs, sat) == pytest.approx(90, abs=1e-5)


def _sat_at_elevation(elev_deg, h):
    # place the satellite in the x-z plane above a ground station at (R, 0, 0)
    R = mpmath.mpf(R_EARTH_M)
    eps = mpmath.radians(elev_deg)
    # central angle from the law of sines in the Earth-centre/GS/satellite triangle
    gamma = mpmath.acos(R / (R + h) * mpmath.cos(eps)) - eps
    return EcefPos(float((R + h) * mpmath.cos(gamma)), 0.0, float((R + h) * mpmath.sin(gamma)))


def test_slant_range_at_25_deg():
    d = slant_range_m(550_000, 25)
    assert d == pytest.approx(1_123_000, abs=1_000)
    gs = EcefPos(R_EARTH_M, 0, 0)
    sat = _sat_at_elevation(25, 550_000)
    assert elevation_deg(gs, sat) == pytest.approx(25, abs=1e-9)
    assert distance_m(gs, sat) == pytest.approx(d, abs=1e-3)


@given(st.floats(0, 90), st.floats(200e3, 2000e3))
def test_slant_range_matches_geometry(elev, h):
    gs = EcefPos(R_EARTH_M, 0, 0)
    sat = _sat_at_elevation(elev, h)
    assert distance_m(gs, sat) == pytest.approx(slant_range_m(h, elev), rel=1e-9, abs=1e-3)


@pytest.mark.parametrize("d, us", [(0, 0), (550_000, 1835), (9_200_000, 30_688)])
def test_delay_examples(d, us):
    assert propagation_delay_us(d) == us


def test_delay_rounds_half_up():
    assert propagation_delay_us(C_M_S * 0.5e-6) == 1
    assert propagation_delay_us(C_M_S * 0.49e-6) == 0


@given(st.floats(0, 1e8), st.floats(0, 1e8))
def test_delay_monotone(a, b):
    lo, hi = sorted((a, b))
    assert propagation_delay_us(lo) <= propagation_delay_us(hi)
    assert abs(propagation_delay_us(a) - a / C_M_S * 1e6) <= 0.5


def test_delay_rejects_negative():
    with pytest.raises(ValueError):
        propagation_delay_us(-1)


def test_rotation_angle():
    t0 = SimInstant.at("2023-09-15T00:00:00Z")
    th0 = earth_rotation_angle_rad(t0)
    assert th0 == pytest.approx(gmst_rad(t0.epoch_utc))
    day = SimInstant(t0.epoch_utc, round(2 * math.pi / OMEGA_EARTH_RAD_S * 1000))
    diff = (earth_rotation_angle_rad(day) - th0 + math.pi) % (2 * math.pi) - math.pi
    assert abs(diff) < 1e-6
    hour = earth_rotation_angle_rad(t0.plus(3600))
    assert (hour - th0) % (2 * math.pi) == pytest.approx(0.26252, abs=1e-5)


def test_gmst_reference_value():
    # linear polynomial at J2000.0 itself
    t = datetime(2000, 1, 1, 12, tzinfo=timezone.utc)
    assert math.degrees(gmst_rad(t)) == pytest.approx(280.46061837)


def test_instant_ordering_and_exact_steps():
    t = SimInstant.at("2023-09-15T00:00:00Z")
    steps = [t.plus(5 * k) for k in range(1000)]
    assert steps == sorted(steps)
    assert steps[999].offset_ms == 4_995_000
    acc = t
    for _ in range(1000):
        acc = acc.plus(0.001)
    assert acc.offset_ms == 1000
    assert SimInstant.at("2023-09-15T00:00:05Z") == t.plus(5)
    assert t.plus(5) > t
    with pytest.raises(ValueError):
        SimInstant(t.epoch_utc, -1)


def test_utc_format_roundtrip():
    s = "2023-09-15T00:00:00Z"
    assert format_utc(parse_utc(s)) == s
    assert parse_utc("2023-09-15T02:00:00+02:00") == parse_utc(s)
    assert format_utc(SimInstant.at(s, 1.5).utc) == "2023-09-15T00:00:01.500000Z"
