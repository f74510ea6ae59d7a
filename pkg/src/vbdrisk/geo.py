"""Geodesic helpers, polygon containment and region lookup.

Coordinates are WGS84 degrees on a spherical Earth.  Polygon tests run in
plain lon/lat space, which is fine at county and neighborhood scale.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MalformedGeometryError, ValidationError

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
_EDGE_EPS = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValidationError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon < 180.0:
            raise ValidationError(f"longitude out of range: {self.lon}")


@dataclass(frozen=True)
class Polygon:
    """Outer ring followed by zero or more holes, each a tuple of GeoPoints."""

    rings: tuple[tuple[GeoPoint, ...], ...]
    bbox: tuple[float, float, float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rings = tuple(tuple(r) for r in self.rings)
        if not rings:
            raise MalformedGeometryError("polygon has no rings")
        for k, ring in enumerate(rings):
            if len(ring) < 3:
                raise MalformedGeometryError(f"ring {k} has {len(ring)} vertices, need >= 3")
        object.__setattr__(self, "rings", rings)
        outer = rings[0]
        lats = [p.lat for p in outer]
        lons = [p.lon for p in outer]
        object.__setattr__(self, "bbox", (min(lats), min(lons), max(lats), max(lons)))

    @classmethod
    def from_lonlat(cls, *rings: Sequence[Sequence[float]]) -> "Polygon":
        """Build from GeoJSON-ordered ``[lon, lat]`` rings; a closing duplicate vertex is dropped."""
        out = []
        for ring in rings:
            pts = [GeoPoint(float(lat), float(lon)) for lon, lat in ring]
            if len(pts) > 1 and pts[0] == pts[-1]:
                pts = pts[:-1]
            out.append(tuple(pts))
        return cls(tuple(out))

    @classmethod
    def box(cls, lat0: float, lon0: float, lat1: float, lon1: float) -> "Polygon":
        ring = [(lon0, lat0), (lon1, lat0), (lon1, lat1), (lon0, lat1)]
        return cls.from_lonlat(ring)

    def to_lonlat(self) -> list[list[list[float]]]:
        rings = []
        for ring in self.rings:
            coords = [[p.lon, p.lat] for p in ring]
            coords.append(coords[0])
            rings.append(coords)
        return rings

    def self_intersects(self) -> bool:
        """True if any two non-adjacent edges of any ring cross."""
        for ring in self.rings:
            n = len(ring)
            edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
            for i in range(n):
                for j in range(i + 1, n):
                    if j == i + 1 or (i == 0 and j == n - 1):
                        continue
                    if _segments_cross(*edges[i], *edges[j]):
                        return True
        return False

    def centroid(self) -> GeoPoint:
        ring = self.rings[0]
        return GeoPoint(sum(p.lat for p in ring) / len(ring), sum(p.lon for p in ring) / len(ring))


@dataclass(frozen=True)
class Patch:
    id: str
    name: str
    geometry: Polygon
    human_population: float
    vector_capacity: float

    def __post_init__(self):
        if not self.human_population > 0:
            raise ValidationError(f"patch {self.id}: human_population must be > 0")
        if not self.vector_capacity >= 0:
            raise ValidationError(f"patch {self.id}: vector_capacity must be >= 0")


@dataclass(frozen=True)
class Neighborhood:
    id: str
    name: str
    geometry: Polygon


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters."""
    return haversine_raw(a.lat, a.lon, b.lat, b.lon)


def haversine_raw(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    # sort endpoints so the result is bit-identical under argument swap
    if (lat1, lon1) > (lat2, lon2):
        lat1, lon1, lat2, lon2 = lat2, lon2, lat1, lon1
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    scale = max(abs(bx - ax), abs(by - ay), 1.0)
    if abs(cross) > _EDGE_EPS * scale:
        return False
    return (min(ax, bx) - _EDGE_EPS <= px <= max(ax, bx) + _EDGE_EPS
            and min(ay, by) - _EDGE_EPS <= py <= max(ay, by) + _EDGE_EPS)


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        v = (q.lon - p.lon) * (r.lat - p.lat) - (q.lat - p.lat) * (r.lon - p.lon)
        return (v > 0) - (v < 0)

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def _ring_status(x: float, y: float, ring: Sequence[GeoPoint]) -> int:
    """1 inside, 0 outside, -1 on the boundary (even-odd rule)."""
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i].lon, ring[i].lat
        xj, yj = ring[j].lon, ring[j].lat
        if _on_segment(x, y, xi, yi, xj, yj):
            return -1
        if (yi > y) != (yj > y):
            xc = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < xc:
                inside = not inside
        j = i
    return 1 if inside else 0


def point_in_polygon(p: GeoPoint, poly: Polygon) -> bool:
    """Even-odd containment; points on any ring edge count as inside."""
    lat0, lon0, lat1, lon1 = poly.bbox
    if not (lat0 <= p.lat <= lat1 and lon0 <= p.lon <= lon1):
        return False
    outer = _ring_status(p.lon, p.lat, poly.rings[0])
    if outer == -1:
        return True
    if outer == 0:
        return False
    for hole in poly.rings[1:]:
        s = _ring_status(p.lon, p.lat, hole)
        if s == -1:
            return True
        if s == 1:
            return False
    return True


def locate(p: GeoPoint, regions: Iterable[Patch | Neighborhood]) -> str | None:
    """Id of the region containing ``p``; overlaps resolve to the smallest id."""
    hits = [r.id for r in regions if point_in_polygon(p, r.geometry)]
    if not hits:
        return None
    if len(hits) > 1:
        log.warning("point (%s, %s) lies in overlapping regions %s; using %s",
                    p.lat, p.lon, sorted(hits), min(hits))
    return min(hits)


# --- GeoJSON ---------------------------------------------------------------

def _polygon_from_geometry(geom: dict, fid: str) -> Polygon:
    if geom is None or geom.get("type") != "Polygon":
        raise MalformedGeometryError(f"feature {fid}: only Polygon geometries are supported")
    poly = Polygon.from_lonlat(*geom["coordinates"])
    if poly.self_intersects():
        log.warning("feature %s: self-intersecting ring", fid)
    return poly


def _features(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValidationError(f"{path}: not a GeoJSON FeatureCollection")
    return doc["features"]


def _require(props: dict, key: str, fid):
    if key not in props:
        raise ValidationError(f"feature {fid}: missing property '{key}'")
    return props[key]


def load_patches(path: str | Path, vector_ratio: float | None = None) -> list[Patch]:
    """Read patches; ``vector_capacity`` may be omitted when ``vector_ratio`` is given."""
    out = []
    for k, feat in enumerate(_features(path)):
        props = feat.get("properties") or {}
        fid = props.get("id", k)
        pop = float(_require(props, "population", fid))
        if "vector_capacity" in props:
            cap = float(props["vector_capacity"])
        elif vector_ratio is not None:
            cap = vector_ratio * pop
        else:
            raise ValidationError(f"feature {fid}: missing property 'vector_capacity'")
        out.append(Patch(str(_require(props, "id", fid)), str(_require(props, "name", fid)),
                         _polygon_from_geometry(feat.get("geometry"), fid), pop, cap))
    return out


def load_neighborhoods(path: str | Path) -> list[Neighborhood]:
    out = []
    for k, feat in enumerate(_features(path)):
        props = feat.get("properties") or {}
        fid = props.get("id", k)
        out.append(Neighborhood(str(_require(props, "id", fid)), str(_require(props, "name", fid)),
                                _polygon_from_geometry(feat.get("geometry"), fid)))
    return out


def regions_to_geojson(regions: Iterable[Patch | Neighborhood], extra: dict | None = None) -> dict:
    """FeatureCollection for patches or neighborhoods; ``extra`` maps id -> additional properties."""
    extra = extra or {}
    feats = []
    for r in regions:
        props = {"id": r.id, "name": r.name}
        if isinstance(r, Patch):
            props["population"] = r.human_population
            props["vector_capacity"] = r.vector_capacity
        props.update(extra.get(r.id, {}))
        feats.append({"type": "Feature", "properties": props,
                      "geometry": {"type": "Polygon", "coordinates": r.geometry.to_lonlat()}})
    return {"type": "FeatureCollection", "features": feats}


def write_geojson(path: str | Path, regions, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(regions_to_geojson(regions, extra), fh, indent=1, sort_keys=True)
        fh.write("\n")
