"""Per-user DBSCAN over geo-tags with a haversine metric."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import _backend
from ..geo import EARTH_RADIUS_M, GeoPoint
from ..ingest import ActivityEvent

EPS_M = 100.0
MIN_GEO_EVENTS = 5


@dataclass
class Cluster:
    user_id: str
    centroid: GeoPoint
    members: list[ActivityEvent]

    @property
    def first_time(self) -> float:
        return min(ev.timestamp.timestamp() for ev in self.members)


def _canonical(events: Sequence[ActivityEvent]) -> list[ActivityEvent]:
    geo = [ev for ev in events if ev.geo is not None]
    return sorted(geo, key=lambda ev: (ev.timestamp, ev.geo.lat, ev.geo.lon, ev.text or ""))


def haversine_matrix(lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
    la = np.radians(lat)
    lo = np.radians(lon)
    s1 = np.sin((la[:, None] - la[None, :]) * 0.5)
    s2 = np.sin((lo[:, None] - lo[None, :]) * 0.5)
    h = np.minimum(s1 * s1 + np.cos(la)[:, None] * np.cos(la)[None, :] * s2 * s2, 1.0)
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(h))


def _dbscan_labels(lat, lon, eps_m, min_pts):
    n = len(lat)
    if min_pts <= 1:
        return np.asarray(_backend.kernels.linkage_labels(lat, lon, eps_m))
    near = haversine_matrix(lat, lon) <= eps_m
    core = near.sum(axis=1) >= min_pts
    labels = np.full(n, -1, dtype=np.int64)
    cur = 0
    for i in range(n):
        if not core[i] or labels[i] >= 0:
            continue
        labels[i] = cur
        stack = [i]
        while stack:
            k = stack.pop()
            for j in np.nonzero(near[k])[0]:
                if labels[j] < 0:
                    labels[j] = cur
                    if core[j]:
                        stack.append(int(j))
        cur += 1
    return labels


def dbscan_user(events: Sequence[ActivityEvent], eps_m: float = EPS_M, min_pts: int = 1,
                min_events: int = MIN_GEO_EVENTS) -> list[Cluster]:
    """Cluster one user's geo-tagged events.

    With ``min_pts=1`` every point is kept and clusters are the connected
    components of the ``eps_m`` neighbor graph.  Users with fewer than
    ``min_events`` geo-tags get no clusters.  Clusters come back ordered by
    their earliest event, so the result does not depend on input order.
    """
    evs = _canonical(events)
    if len(evs) < min_events:
        return []
    lat = np.ascontiguousarray([ev.geo.lat for ev in evs], dtype=float)
    lon = np.ascontiguousarray([ev.geo.lon for ev in evs], dtype=float)
    labels = _dbscan_labels(lat, lon, eps_m, min_pts)
    out = []
    for lab in range(int(labels.max()) + 1 if len(labels) else 0):
        idx = np.nonzero(labels == lab)[0]
        if not len(idx):
            continue
        members = [evs[i] for i in idx]
        out.append(Cluster(evs[0].user_id, GeoPoint(float(lat[idx].mean()), float(lon[idx].mean())),
                           members))
    return out


def group_by_user(events: Sequence[ActivityEvent]) -> dict[str, list[ActivityEvent]]:
    users: dict[str, list[ActivityEvent]] = {}
    for ev in events:
        users.setdefault(ev.user_id, []).append(ev)
    return users
