"""Ten-feature records for candidate home clusters.

=====  ===============================================================
f1     events in the cluster
f2     fraction of the user's geo events in the cluster
f3     fraction of cluster events at local 19:00-24:00 (end of day)
f4     fraction at local 00:00-08:00
f5     fraction on local Saturday/Sunday
f6     distinct local days with activity in the cluster
f7     days between first and last cluster event
f8     local days whose last geo event of the user falls in the cluster
f9     distinct other users with events within 100 m of the centroid
f10    share of all indexed events within 100 m of the centroid
=====  ===============================================================
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import FormatError
from ..geo import EARTH_RADIUS_M, GeoPoint
from ..ingest import ActivityEvent
from .clustering import EPS_M, Cluster

log = logging.getLogger(__name__)

FEATURES = tuple(f"f{k}" for k in range(1, 11))
DEFAULT_TZ_OFFSET = -4.0
_CELL_DEG = 0.001


@dataclass
class ClusterRecord:
    user_id: str
    cluster: int
    centroid: GeoPoint | None
    first_time: float
    features: np.ndarray
    label: bool | None = None


class LocationIndex:
    """Grid of all users' geo events for radius queries.

    Cells are at least ``radius_m`` wide, so a 3x3 block around the query
    cell covers the whole search disk; hits are then checked exactly.
    """

    def __init__(self, events: Iterable[ActivityEvent], radius_m: float = EPS_M):
        pts = [(ev.geo.lat, ev.geo.lon, ev.user_id) for ev in events if ev.geo is not None]
        self.radius_m = radius_m
        self.total = len(pts)
        users = sorted({u for _, _, u in pts})
        self._uid = {u: k for k, u in enumerate(users)}
        max_lat = max((abs(p[0]) for p in pts), default=0.0)
        scale = radius_m / 100.0
        self.dlat = _CELL_DEG * scale
        self.dlon = _CELL_DEG * scale / math.cos(math.radians(min(max_lat + 0.01, 89.0)))
        cells: dict[tuple[int, int], list[int]] = defaultdict(list)
        self.lat = np.array([p[0] for p in pts], dtype=float)
        self.lon = np.array([p[1] for p in pts], dtype=float)
        self.user = np.array([self._uid[p[2]] for p in pts], dtype=np.int64)
        for k, (la, lo, _) in enumerate(pts):
            cells[self._cell(la, lo)].append(k)
        self._cells = {c: np.array(v, dtype=np.int64) for c, v in cells.items()}

    def _cell(self, lat, lon):
        return (math.floor(lat / self.dlat), math.floor(lon / self.dlon))

    def query(self, p: GeoPoint) -> np.ndarray:
        """Indices of indexed events within ``radius_m`` of ``p``."""
        ci, cj = self._cell(p.lat, p.lon)
        cand = [self._cells[(ci + a, cj + b)] for a in (-1, 0, 1) for b in (-1, 0, 1)
                if (ci + a, cj + b) in self._cells]
        if not cand:
            return np.zeros(0, dtype=np.int64)
        idx = np.concatenate(cand)
        la = np.radians(self.lat[idx])
        p1 = math.radians(p.lat)
        s1 = np.sin((la - p1) * 0.5)
        s2 = np.sin(np.radians(self.lon[idx] - p.lon) * 0.5)
        h = np.minimum(s1 * s1 + math.cos(p1) * np.cos(la) * s2 * s2, 1.0)
        d = 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h))
        return np.sort(idx[d <= self.radius_m])

    def other_users(self, p: GeoPoint, user_id: str) -> int:
        hit = self.query(p)
        me = self._uid.get(user_id, -1)
        return int(len(np.unique(self.user[hit][self.user[hit] != me])))

    def share(self, p: GeoPoint) -> float:
        return len(self.query(p)) / self.total if self.total else 0.0


def _local(ev: ActivityEvent, tz_offset: float):
    return ev.timestamp + timedelta(hours=tz_offset)


def extract_records(clusters: Sequence[Cluster], index: LocationIndex,
                    tz_offset: float | None = DEFAULT_TZ_OFFSET) -> list[ClusterRecord]:
    """One record per cluster of a single user."""
    if tz_offset is None:
        log.warning("no timezone offset given; using UTC%+g", DEFAULT_TZ_OFFSET)
        tz_offset = DEFAULT_TZ_OFFSET
    if not clusters:
        return []
    n_user = sum(len(c.members) for c in clusters)

    # chronologically last event of each local day, across the user's clusters
    last_of_day: dict = {}
    for k, c in enumerate(clusters):
        for ev in c.members:
            loc = _local(ev, tz_offset)
            day = loc.date()
            key = (loc, k)
            if day not in last_of_day or key > last_of_day[day]:
                last_of_day[day] = key
    day_end_counts = defaultdict(int)
    for _, k in last_of_day.values():
        day_end_counts[k] += 1

    out = []
    for k, c in enumerate(clusters):
        locs = [_local(ev, tz_offset) for ev in c.members]
        n = len(locs)
        hours = np.array([t.hour + t.minute / 60.0 for t in locs])
        days = {t.date() for t in locs}
        span = (max(locs) - min(locs)).total_seconds() / 86400.0
        feats = np.array([
            n,
            n / n_user,
            np.mean(hours >= 19.0),
            np.mean(hours < 8.0),
            np.mean([t.weekday() >= 5 for t in locs]),
            len(days),
            span,
            day_end_counts[k],
            index.other_users(c.centroid, c.user_id),
            index.share(c.centroid),
        ], dtype=float)
        out.append(ClusterRecord(c.user_id, k, c.centroid, c.first_time, feats))
    return out


RECORD_COLUMNS = ["user_id", "cluster", "lat", "lon", "first_time", *FEATURES, "label"]


def write_records(path: str | Path, records: Iterable[ClusterRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            lat = "" if r.centroid is None else repr(r.centroid.lat)
            lon = "" if r.centroid is None else repr(r.centroid.lon)
            label = "" if r.label is None else int(r.label)
            w.writerow([r.user_id, r.cluster, lat, lon, repr(r.first_time),
                        *(repr(float(v)) for v in r.features), label])


def read_records(path: str | Path) -> list[ClusterRecord]:
    """Read records; only ``user_id``, ``f1``..``f10`` are required."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        missing = {"user_id", *FEATURES} - cols
        if missing:
            raise FormatError(f"{path}: missing columns {sorted(missing)}")
        counts: dict[str, int] = defaultdict(int)
        for row in reader:
            uid = row["user_id"]
            feats = np.array([float(row[f]) for f in FEATURES])
            if not np.all(np.isfinite(feats)):
                raise FormatError(f"{path}: non-finite feature for user {uid}")
            cl = int(row["cluster"]) if row.get("cluster") else counts[uid]
            counts[uid] += 1
            centroid = None
            if row.get("lat") and row.get("lon"):
                centroid = GeoPoint(float(row["lat"]), float(row["lon"]))
            first = float(row["first_time"]) if row.get("first_time") else float(cl)
            label = None
            if row.get("label") not in (None, ""):
                label = row["label"].strip().lower() in ("1", "true", "yes")
            out.append(ClusterRecord(uid, cl, centroid, first, feats, label))
    return out
