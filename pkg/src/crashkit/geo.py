"""State-plane coordinate recovery and static map URL construction.

Crash locations arrive as Lambert conformal conic state-plane coordinates
(two standard parallels, ellipsoidal form). This module inverts them to
geodetic latitude/longitude, provides the matching forward projection, and
renders satellite tile URLs for the recovered points.

The default projection is the Washington South zone on the GRS 80 ellipsoid:
standard parallels 45 deg 50 min and 47 deg 20 min, origin latitude
45 deg 20 min, central meridian 120 deg 30 min W, false easting 500,000 m,
false northing 0. Units are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from urllib.parse import urlencode

from .errors import InvalidZoom, NonConvergence, OutOfDomain

MAX_LAT_ITERATIONS = 25
LAT_TOLERANCE_RAD = 1e-12


def dms(degrees: float, minutes: float = 0.0, seconds: float = 0.0) -> float:
    """Degrees/minutes/seconds to decimal degrees (sign on the degrees part)."""
    sign = -1.0 if degrees < 0 else 1.0
    return sign * (abs(degrees) + minutes / 60.0 + seconds / 3600.0)


@dataclass(frozen=True)
class LccParams:
    """Two-standard-parallel Lambert conformal conic on a reference ellipsoid."""

    semi_major_m: float
    inverse_flattening: float
    std_parallel_1_deg: float
    std_parallel_2_deg: float
    origin_lat_deg: float
    central_meridian_deg: float
    false_easting_m: float
    false_northing_m: float

    @property
    def eccentricity(self) -> float:
        f = 1.0 / self.inverse_flattening
        return math.sqrt(f * (2.0 - f))


WASHINGTON_SOUTH = LccParams(
    semi_major_m=6378137.0,
    inverse_flattening=298.257222101,
    std_parallel_1_deg=dms(45, 50),
    std_parallel_2_deg=dms(47, 20),
    origin_lat_deg=dms(45, 20),
    central_meridian_deg=-dms(120, 30),
    false_easting_m=500000.0,
    false_northing_m=0.0,
)


def _m(phi: float, e: float) -> float:
    """Radius-of-parallel factor: cos(phi) / sqrt(1 - e^2 sin^2 phi)."""
    s = math.sin(phi)
    return math.cos(phi) / math.sqrt(1.0 - e * e * s * s)


def _t(phi: float, e: float) -> float:
    """Isometric colatitude factor for the conformal cone."""
    s = math.sin(phi)
    return math.tan(math.pi / 4.0 - phi / 2.0) / ((1.0 - e * s) / (1.0 + e * s)) ** (e / 2.0)


@dataclass(frozen=True)
class _Cone:
    n: float      # cone constant
    af: float     # a * F
    rho0: float   # radius at the origin latitude
    e: float


def _cone(params: LccParams) -> _Cone:
    e = params.eccentricity
    phi1 = math.radians(params.std_parallel_1_deg)
    phi2 = math.radians(params.std_parallel_2_deg)
    phi0 = math.radians(params.origin_lat_deg)
    m1, m2 = _m(phi1, e), _m(phi2, e)
    t1, t2 = _t(phi1, e), _t(phi2, e)
    n = (math.log(m1) - math.log(m2)) / (math.log(t1) - math.log(t2))
    af = params.semi_major_m * m1 / (n * t1 ** n)
    rho0 = af * _t(phi0, e) ** n
    return _Cone(n=n, af=af, rho0=rho0, e=e)


def lcc_forward(lat_deg: float, lon_deg: float, params: LccParams = WASHINGTON_SOUTH) -> tuple[float, float]:
    """Project geodetic lat/lon (degrees) to easting/northing (meters)."""
    if not -90.0 < lat_deg < 90.0:
        raise OutOfDomain(f"latitude {lat_deg!r} out of range")
    cone = _cone(params)
    phi = math.radians(lat_deg)
    lam = math.radians(lon_deg)
    lam0 = math.radians(params.central_meridian_deg)
    rho = cone.af * _t(phi, cone.e) ** cone.n
    theta = cone.n * (lam - lam0)
    easting = params.false_easting_m + rho * math.sin(theta)
    northing = params.false_northing_m + cone.rho0 - rho * math.cos(theta)
    return easting, northing


def lcc_inverse(easting_m: float, northing_m: float, params: LccParams = WASHINGTON_SOUTH) -> tuple[float, float]:
    """Recover geodetic lat/lon (degrees) from easting/northing (meters).

    Latitude comes from fixed-point iteration on the conformal latitude
    relation, converged to 1e-12 radians. Points whose polar radius is
    inconsistent with the cone (beyond the apex, or swept past the cone's
    angular extent) are rejected as out of domain.
    """
    cone = _cone(params)
    x = easting_m - params.false_easting_m
    y = cone.rho0 - (northing_m - params.false_northing_m)
    rho = math.hypot(x, y)
    sign = 1.0 if cone.n >= 0 else -1.0
    if rho == 0.0:
        # Cone apex: the pole on the cone's side.
        return math.copysign(90.0, cone.n), params.central_meridian_deg
    theta = math.atan2(sign * x, sign * y)
    if abs(theta) > abs(cone.n) * math.pi:
        raise OutOfDomain(
            "projected point lies outside the cone "
            f"(easting={easting_m!r}, northing={northing_m!r})")
    t_val = (sign * rho / cone.af) ** (1.0 / cone.n)
    phi = math.pi / 2.0 - 2.0 * math.atan(t_val)
    for _ in range(MAX_LAT_ITERATIONS):
        s = cone.e * math.sin(phi)
        phi_next = math.pi / 2.0 - 2.0 * math.atan(
            t_val * ((1.0 - s) / (1.0 + s)) ** (cone.e / 2.0))
        if abs(phi_next - phi) < LAT_TOLERANCE_RAD:
            phi = phi_next
            break
        phi = phi_next
    else:
        raise NonConvergence(
            f"latitude iteration did not converge for ({easting_m!r}, {northing_m!r})")
    lam = theta / cone.n + math.radians(params.central_meridian_deg)
    return math.degrees(phi), math.degrees(lam)


DEFAULT_TILE_SIZE = 512
DEFAULT_TILE_ZOOM = 19
_TILE_BASE = "https://maps.googleapis.com/maps/api/staticmap"
TILE_URL_SCHEME_VERSION = 1


def tile_url(lat_deg: float, lon_deg: float, api_key: str,
             size: int = DEFAULT_TILE_SIZE, zoom: int = DEFAULT_TILE_ZOOM) -> str:
    """Build a satellite static-map URL centered on a point.

    Coordinates are fixed at six decimal places so identical inputs yield
    byte-identical URLs. No network I/O happens here.
    """
    if not isinstance(zoom, int) or not 0 <= zoom <= 21:
        raise InvalidZoom(f"zoom must be an integer in 0..21, got {zoom!r}")
    query = urlencode([
        ("center", f"{lat_deg:.6f},{lon_deg:.6f}"),
        ("zoom", str(zoom)),
        ("size", f"{size}x{size}"),
        ("maptype", "satellite"),
        ("key", api_key),
    ])
    return f"{_TILE_BASE}?{query}"
