"""Readers and writers for activity traces, profiles, follower graphs and air
traffic tables, plus the offline follower-graph snowball walk."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import ConfigError, FormatError, ValidationError
from .geo import GeoPoint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActivityEvent:
    user_id: str
    timestamp: datetime
    geo: GeoPoint | None = None
    text: str | None = None

    def __post_init__(self):
        if self.geo is None and self.text is None:
            raise ValidationError("event needs a geo-tag or text")
        if self.timestamp.tzinfo is None:
            raise ValidationError("event timestamp must be timezone-aware")


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    profile_home: str | None = None

    def __post_init__(self):
        if not self.user_id:
            raise ValidationError("empty user_id")


@dataclass
class SocialGraph:
    """``adjacency[u]`` lists the followers of ``u``."""

    adjacency: dict[str, list[str]]

    def users(self) -> set[str]:
        seen = set(self.adjacency)
        for fs in self.adjacency.values():
            seen.update(fs)
        return seen


# --- events -----------------------------------------------------------------

def format_ts(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_ts(raw: str) -> datetime:
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def event_to_json(ev: ActivityEvent) -> str:
    rec: dict = {"user_id": ev.user_id, "ts": format_ts(ev.timestamp)}
    if ev.geo is not None:
        rec["lat"] = ev.geo.lat
        rec["lon"] = ev.geo.lon
    if ev.text is not None:
        rec["text"] = ev.text
    return json.dumps(rec, ensure_ascii=False, sort_keys=True)


def event_from_record(rec: dict) -> ActivityEvent:
    uid = rec["user_id"]
    if not isinstance(uid, str) or not uid:
        raise ValidationError("bad user_id")
    geo = None
    if rec.get("lat") is not None or rec.get("lon") is not None:
        geo = GeoPoint(float(rec["lat"]), float(rec["lon"]))
    text = rec.get("text")
    if text is not None and not isinstance(text, str):
        raise ValidationError("text must be a string")
    return ActivityEvent(uid, parse_ts(rec["ts"]), geo, text)


def scan_events(path: str | Path) -> tuple[list[ActivityEvent], int]:
    """Parse a JSON-lines event file; returns valid events in file order and the reject count."""
    events: list[ActivityEvent] = []
    rejects = 0
    total = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            total += 1
            try:
                events.append(event_from_record(json.loads(line)))
            except (ValueError, KeyError, TypeError, ValidationError) as exc:
                rejects += 1
                log.debug("%s:%d rejected: %s", path, lineno, exc)
    if total and rejects / total > 0.5:
        raise FormatError(f"{path}: {rejects} of {total} records malformed")
    if rejects:
        log.warning("%s: rejected %d of %d records", path, rejects, total)
    return events, rejects


def load_events(path: str | Path) -> list[ActivityEvent]:
    return scan_events(path)[0]


def write_events(path: str | Path, events: Iterable[ActivityEvent]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ev in events:
            fh.write(event_to_json(ev))
            fh.write("\n")


# --- profiles and graph -----------------------------------------------------

def load_profiles(path: str | Path) -> dict[str, UserProfile]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"user_id", "profile_home"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: expected columns user_id,profile_home")
        for row in reader:
            home = row["profile_home"] or None
            out[row["user_id"]] = UserProfile(row["user_id"], home)
    return out


def write_profiles(path: str | Path, profiles: Iterable[UserProfile]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "profile_home"])
        for p in profiles:
            w.writerow([p.user_id, p.profile_home or ""])


def load_graph(path: str | Path) -> SocialGraph:
    adj: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                user, followers = rec["user"], rec["followers"]
            except (ValueError, KeyError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            adj.setdefault(str(user), []).extend(str(f) for f in followers)
    return SocialGraph(adj)


def write_graph(path: str | Path, graph: SocialGraph) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for user in sorted(graph.adjacency):
            fh.write(json.dumps({"user": user, "followers": graph.adjacency[user]}))
            fh.write("\n")


# --- snowball walk ----------------------------------------------------------

def zone_predicate(zones: Iterable[str]) -> Callable[[UserProfile], bool]:
    wanted = frozenset(zones)
    return lambda prof: prof.profile_home in wanted


def snowball_sample(graph: SocialGraph, seeds: Iterable[str],
                    keep: Callable[[UserProfile], bool],
                    profiles: Mapping[str, UserProfile] | None = None) -> set[str]:
    """Users reachable from ``seeds`` through kept users, plus every follower
    of a kept user.  Followers failing ``keep`` are included but not expanded."""
    profiles = profiles or {}
    known = graph.users()

    def kept(uid: str) -> bool:
        return keep(profiles.get(uid) or UserProfile(uid))

    seeds = list(seeds)
    for s in seeds:
        if s not in known and s not in profiles:
            raise ConfigError(f"unknown seed user {s!r}")
        if not kept(s):
            raise ConfigError(f"seed user {s!r} does not satisfy the membership predicate")

    result = set(seeds)
    expanded: set[str] = set()
    queue = deque(seeds)
    while queue:
        u = queue.popleft()
        if u in expanded:
            continue
        expanded.add(u)
        for f in graph.adjacency.get(u, ()):
            if f == u:
                continue
            result.add(f)
            if f not in expanded and kept(f):
                queue.append(f)
    return result


# --- air traffic ------------------------------------------------------------

def load_air_traffic(path: str | Path) -> dict[tuple[str, str], float]:
    """``(source, dest_region) -> persons/day``; duplicate rows are summed."""
    out: dict[tuple[str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"source", "dest_region", "persons_per_day"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValidationError(f"{path}: expected columns source,dest_region,persons_per_day")
        for row in reader:
            try:
                vol = float(row["persons_per_day"])
            except (TypeError, ValueError):
                raise ValidationError(f"{path}: bad volume {row['persons_per_day']!r}") from None
            if not math.isfinite(vol) or vol < 0:
                raise ValidationError(f"{path}: negative or non-finite volume {vol}")
            key = (row["source"], row["dest_region"])
            out[key] = out.get(key, 0.0) + vol
    return out
