"""Coordinate transforms: WGS84 geographic <-> Swiss LV95 and UTM.

LV95 uses the official approximate polynomial series (~1 m absolute
accuracy); the inverse direction is refined by Newton iteration against
the forward polynomial so the pair is mutually consistent far below the
meter level. UTM uses the exact-conformal-latitude Krueger series in the
third flattening to order n^6 (millimeter-class inside a zone).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfDomain
from .raster import CrsId

# WGS84 ellipsoid
_A = 6378137.0
_F = 1.0 / 298.257223563
_E2 = _F * (2.0 - _F)
_E = math.sqrt(_E2)
_N = _F / (2.0 - _F)  # third flattening

_UTM_K0 = 0.9996
_UTM_FALSE_EASTING = 500000.0
_UTM_FALSE_NORTHING_S = 10000000.0

# Rectifying radius and forward/inverse series coefficients (order n^6).
_A_RADIUS = _A / (1.0 + _N) * (1.0 + _N**2 / 4.0 + _N**4 / 64.0 + _N**6 / 256.0)
_ALPHA = (
    _N / 2 - 2 * _N**2 / 3 + 5 * _N**3 / 16 + 41 * _N**4 / 180 - 127 * _N**5 / 288 + 7891 * _N**6 / 37800,
    13 * _N**2 / 48 - 3 * _N**3 / 5 + 557 * _N**4 / 1440 + 281 * _N**5 / 630 - 1983433 * _N**6 / 1935360,
    61 * _N**3 / 240 - 103 * _N**4 / 140 + 15061 * _N**5 / 26880 + 167603 * _N**6 / 181440,
    49561 * _N**4 / 161280 - 179 * _N**5 / 168 + 6601661 * _N**6 / 7257600,
    34729 * _N**5 / 80640 - 3418889 * _N**6 / 1995840,
    212378941 * _N**6 / 319334400,
)
_BETA = (
    _N / 2 - 2 * _N**2 / 3 + 37 * _N**3 / 96 - _N**4 / 360 - 81 * _N**5 / 512 + 96199 * _N**6 / 604800,
    _N**2 / 48 + _N**3 / 15 - 437 * _N**4 / 1440 + 46 * _N**5 / 105 - 1118711 * _N**6 / 3870720,
    17 * _N**3 / 480 - 37 * _N**4 / 840 - 209 * _N**5 / 4480 + 5569 * _N**6 / 90720,
    4397 * _N**4 / 161280 - 11 * _N**5 / 504 - 830251 * _N**6 / 7257600,
    4583 * _N**5 / 161280 - 108847 * _N**6 / 3991680,
    20648693 * _N**6 / 638668800,
)

# LV95 validity boxes
LV95_LON_RANGE = (5.0, 11.0)
LV95_LAT_RANGE = (45.0, 48.0)
LV95_EASTING_RANGE = (2.45e6, 2.85e6)
LV95_NORTHING_RANGE = (1.05e6, 1.35e6)

UTM_MAX_LAT = 84.0
UTM_EASTING_RANGE = (0.0, 1.0e6)
UTM_NORTHING_RANGE = (0.0, 1.0e7)


@dataclass(frozen=True)
class GeoPoint:
    """Geographic coordinate in degrees (WGS84)."""

    lon: float
    lat: float

    def __post_init__(self):
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")


@dataclass(frozen=True)
class ProjectedPoint:
    """Projected coordinate in meters; crs must be LV95 or UTM."""

    easting: float
    northing: float
    crs: CrsId

    def __post_init__(self):
        if self.crs.kind == "WGS84":
            raise ValueError("projected point cannot carry the WGS84 CRS")


# ---------------------------------------------------------------------------
# Swiss LV95 (approximate official series + consistent Newton inverse)
# ---------------------------------------------------------------------------


def _lv95_forward(lon: float, lat: float) -> tuple[float, float]:
    phi = (lat * 3600.0 - 169028.66) / 10000.0
    lam = (lon * 3600.0 - 26782.5) / 10000.0
    e = (
        2600072.37
        + 211455.93 * lam
        - 10938.51 * lam * phi
        - 0.36 * lam * phi * phi
        - 44.54 * lam**3
    )
    n = (
        1200147.07
        + 308807.95 * phi
        + 3745.25 * lam * lam
        + 76.63 * phi * phi
        - 194.56 * lam * lam * phi
        + 119.79 * phi**3
    )
    return e, n


def _lv95_forward_jacobian(lon: float, lat: float):
    phi = (lat * 3600.0 - 169028.66) / 10000.0
    lam = (lon * 3600.0 - 26782.5) / 10000.0
    # derivatives in the auxiliary units; chain rule d(aux)/d(deg) = 0.36
    de_dlam = 211455.93 - 10938.51 * phi - 0.36 * phi * phi - 3.0 * 44.54 * lam * lam
    de_dphi = -10938.51 * lam - 2.0 * 0.36 * lam * phi
    dn_dlam = 2.0 * 3745.25 * lam - 2.0 * 194.56 * lam * phi
    dn_dphi = 308807.95 + 2.0 * 76.63 * phi - 194.56 * lam * lam + 3.0 * 119.79 * phi * phi
    s = 0.36
    return de_dlam * s, de_dphi * s, dn_dlam * s, dn_dphi * s


def _lv95_inverse_seed(easting: float, northing: float) -> tuple[float, float]:
    y = (easting - 2600000.0) / 1000000.0
    x = (northing - 1200000.0) / 1000000.0
    lam = (
        2.6779094
        + 4.728982 * y
        + 0.791484 * y * x
        + 0.1306 * y * x * x
        - 0.0436 * y**3
    )
    phi = (
        16.9023892
        + 3.238272 * x
        - 0.270978 * y * y
        - 0.002528 * x * x
        - 0.0447 * y * y * x
        - 0.0140 * x**3
    )
    return lam * 100.0 / 36.0, phi * 100.0 / 36.0


def wgs84_to_lv95(p: GeoPoint) -> ProjectedPoint:
    """Project WGS84 degrees to Swiss LV95 meters (approximation valid near Switzerland)."""
    if not (LV95_LON_RANGE[0] <= p.lon <= LV95_LON_RANGE[1]) or not (
        LV95_LAT_RANGE[0] <= p.lat <= LV95_LAT_RANGE[1]
    ):
        raise OutOfDomain(
            f"({p.lon}, {p.lat}) outside the LV95 approximation box "
            f"lon {LV95_LON_RANGE}, lat {LV95_LAT_RANGE}"
        )
    e, n = _lv95_forward(p.lon, p.lat)
    return ProjectedPoint(e, n, CrsId.lv95())


def lv95_to_wgs84(p: ProjectedPoint) -> GeoPoint:
    """Invert :func:`wgs84_to_lv95`.

    The official inverse series only agrees with the forward series to a
    few meters, so it is used as the seed for a Newton solve against the
    forward polynomial; the returned point round-trips to machine precision.
    """
    if p.crs.kind != "LV95":
        raise OutOfDomain(f"expected LV95 coordinates, got {p.crs.to_string()}")
    if not (LV95_EASTING_RANGE[0] <= p.easting <= LV95_EASTING_RANGE[1]) or not (
        LV95_NORTHING_RANGE[0] <= p.northing <= LV95_NORTHING_RANGE[1]
    ):
        raise OutOfDomain(
            f"({p.easting}, {p.northing}) outside LV95 bounds "
            f"E {LV95_EASTING_RANGE}, N {LV95_NORTHING_RANGE}"
        )
    lon, lat = _lv95_inverse_seed(p.easting, p.northing)
    for _ in range(4):
        e, n = _lv95_forward(lon, lat)
        de, dn = e - p.easting, n - p.northing
        if abs(de) < 1e-9 and abs(dn) < 1e-9:
            break
        j00, j01, j10, j11 = _lv95_forward_jacobian(lon, lat)
        det = j00 * j11 - j01 * j10
        lon -= (j11 * de - j01 * dn) / det
        lat -= (-j10 * de + j00 * dn) / det
    return GeoPoint(lon, lat)


# ---------------------------------------------------------------------------
# UTM (Krueger series, order n^6)
# ---------------------------------------------------------------------------


def _central_meridian(zone: int) -> float:
    return math.radians(-183.0 + zone * 6.0)


def _check_zone(zone: int) -> None:
    if not 1 <= zone <= 60:
        raise OutOfDomain(f"UTM zone {zone} outside 1..60")


def wgs84_to_utm(p: GeoPoint, zone: int, hemisphere: str = "N") -> ProjectedPoint:
    """Project WGS84 degrees to UTM meters in the caller-supplied zone."""
    _check_zone(zone)
    if hemisphere not in ("N", "S"):
        raise OutOfDomain(f"hemisphere must be 'N' or 'S', got {hemisphere!r}")
    if abs(p.lat) > UTM_MAX_LAT:
        raise OutOfDomain(f"latitude {p.lat} beyond +-{UTM_MAX_LAT} (polar cap)")
    phi = math.radians(p.lat)
    lam = math.radians(p.lon) - _central_meridian(zone)
    lam = math.atan2(math.sin(lam), math.cos(lam))  # wrap to (-pi, pi]

    t = math.tan(phi)
    sigma = math.sinh(_E * math.atanh(_E * t / math.sqrt(1.0 + t * t)))
    tp = t * math.sqrt(1.0 + sigma * sigma) - sigma * math.sqrt(1.0 + t * t)
    xi = math.atan2(tp, math.cos(lam))
    eta = math.asinh(math.sin(lam) / math.hypot(tp, math.cos(lam)))
    xi_s, eta_s = xi, eta
    for j in range(1, 7):
        a = _ALPHA[j - 1]
        xi_s += a * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_s += a * math.cos(2 * j * xi) * math.sinh(2 * j * eta)
    easting = _UTM_K0 * _A_RADIUS * eta_s + _UTM_FALSE_EASTING
    northing = _UTM_K0 * _A_RADIUS * xi_s
    if hemisphere == "S":
        northing += _UTM_FALSE_NORTHING_S
    return ProjectedPoint(easting, northing, CrsId.utm(zone, hemisphere))


def _tau_from_tau_prime(tp: float) -> float:
    # Newton solve tan(phi) from the conformal tangent.
    e2m = 1.0 - _E2
    t = tp / e2m
    for _ in range(10):
        sigma = math.sinh(_E * math.atanh(_E * t / math.sqrt(1.0 + t * t)))
        taupa = t * math.sqrt(1.0 + sigma * sigma) - sigma * math.sqrt(1.0 + t * t)
        dt = (
            (tp - taupa)
            * (1.0 + e2m * t * t)
            / (e2m * math.sqrt(1.0 + t * t) * math.sqrt(1.0 + taupa * taupa))
        )
        t += dt
        if abs(dt) < 1e-16 * max(1.0, abs(tp)):
            break
    return t


def utm_to_wgs84(p: ProjectedPoint) -> GeoPoint:
    """Invert :func:`wgs84_to_utm`."""
    if p.crs.kind != "UTM":
        raise OutOfDomain(f"expected UTM coordinates, got {p.crs.to_string()}")
    if not (UTM_EASTING_RANGE[0] <= p.easting <= UTM_EASTING_RANGE[1]) or not (
        UTM_NORTHING_RANGE[0] <= p.northing <= UTM_NORTHING_RANGE[1]
    ):
        raise OutOfDomain(f"({p.easting}, {p.northing}) outside UTM coordinate bounds")
    northing = p.northing
    if p.crs.hemisphere == "S":
        northing -= _UTM_FALSE_NORTHING_S
    xi = northing / (_UTM_K0 * _A_RADIUS)
    eta = (p.easting - _UTM_FALSE_EASTING) / (_UTM_K0 * _A_RADIUS)
    xi_p, eta_p = xi, eta
    for j in range(1, 7):
        b = _BETA[j - 1]
        xi_p -= b * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_p -= b * math.cos(2 * j * xi) * math.sinh(2 * j * eta)
    tp = math.sin(xi_p) / math.sqrt(math.sinh(eta_p) ** 2 + math.cos(xi_p) ** 2)
    lat = math.degrees(math.atan(_tau_from_tau_prime(tp)))
    lon = math.degrees(_central_meridian(p.crs.zone) + math.atan2(math.sinh(eta_p), math.cos(xi_p)))
    if lon > 180.0:
        lon -= 360.0
    elif lon < -180.0:
        lon += 360.0
    return GeoPoint(lon, lat)
