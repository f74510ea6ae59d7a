"""Seeded synthetic activity traces with planted homes and trips.

Stands in for the harvested Puerto Rico / Florida traces.  Users either live
in the source zone and travel to Florida, live in Florida and travel to the
source zone, or never leave Florida.  Every user gets at least five geo-tagged
events; home events are jittered within 50 m of the planted home.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import world
from .errors import ConfigError, ValidationError
from .geo import GeoPoint, Neighborhood, Patch, load_neighborhoods, load_patches, point_in_polygon
from .ingest import ActivityEvent, SocialGraph, UserProfile, write_events, write_graph, write_profiles

HOME_JITTER_M = 45.0
POI_JITTER_M = 40.0
MIN_GEO_EVENTS = 5
_M_PER_DEG = 111_194.9

_SYLLABLES = ["ka", "lo", "mi", "tu", "re", "sa", "no", "pi", "ve", "do", "ba", "xi",
              "ru", "fe", "go", "la", "zu", "qe", "ni", "ho", "wa", "ty", "me", "jo"]
COMMON_WORDS = ["the", "a", "today", "good", "love", "day", "time", "people", "new", "just",
                "now", "home", "got", "see", "back", "going", "great", "night", "life", "work",
                "happy", "friends", "lol", "best", "really", "want", "need", "know", "thanks", "fun"]


@dataclass
class SynthConfig:
    seed: int = 0
    n_users: int = 500
    home_rate: float = 0.6
    home_rate_spread: float = 0.0
    travel_fraction: float = 0.3
    source_zone: str = world.SOURCE_ID
    patches: str = "builtin"
    neighborhoods: str = "builtin"
    miami_zone: str = world.MIAMI_ID
    dest_weights: dict[str, float] | None = None
    visitor_neighborhood_weights: dict[str, float] | None = None
    resident_neighborhood_weights: dict[str, float] | None = None
    vocabulary_per_zone: dict[str, list[str]] | None = None
    words_per_zone: int = 20
    events_per_user: tuple[int, int] = (12, 40)
    text_rate: float = 0.6
    text_only_per_user: tuple[int, int] = (0, 3)
    work_share: float = 0.6
    night_worker_rate: float = 0.1
    pois_per_zone: int = 6
    profile_rate: float = 0.85
    tz_offset_hours: float = -4.0
    start: str = "2016-01-01"
    span_days: int = 180
    max_events_per_user: int | None = None

    def __post_init__(self):
        for name in ("home_rate", "home_rate_spread", "travel_fraction", "text_rate", "work_share",
                     "night_worker_rate", "profile_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.n_users <= 0:
            raise ValidationError("n_users must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        self.events_per_user = tuple(self.events_per_user)
        self.text_only_per_user = tuple(self.text_only_per_user)
        if self.events_per_user[0] < MIN_GEO_EVENTS or self.events_per_user[1] < self.events_per_user[0]:
            raise ValidationError(f"events_per_user must be an interval starting at >= {MIN_GEO_EVENTS}")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown synth config keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["events_per_user"] = list(self.events_per_user)
        d["text_only_per_user"] = list(self.text_only_per_user)
        return d


@dataclass
class SynthResult:
    events: list[ActivityEvent]
    profiles: list[UserProfile]
    graph: SocialGraph
    homes: dict[str, dict]
    trips: dict[str, list[str]]
    corpus: list[tuple[str, str]] = field(default_factory=list)

    def truth_json(self) -> dict:
        return {"homes": self.homes, "trips": self.trips}


def resolve_patches(ref: str) -> list[Patch]:
    if ref == "builtin":
        return world.florida_patches()
    try:
        return load_patches(ref, vector_ratio=world.DEFAULT_VECTOR_RATIO)
    except OSError as exc:
        raise ConfigError(f"cannot resolve patches {ref!r}: {exc}") from None


def resolve_neighborhoods(ref: str) -> list[Neighborhood]:
    if ref == "builtin":
        return world.miami_neighborhoods()
    try:
        return load_neighborhoods(ref)
    except OSError as exc:
        raise ConfigError(f"cannot resolve neighborhoods {ref!r}: {exc}") from None


def _offset(rng, p: GeoPoint, radius_m: float) -> GeoPoint:
    r = radius_m * math.sqrt(rng.random())
    th = 2 * math.pi * rng.random()
    dlat = r * math.cos(th) / _M_PER_DEG
    dlon = r * math.sin(th) / (_M_PER_DEG * math.cos(math.radians(p.lat)))
    return GeoPoint(p.lat + dlat, p.lon + dlon)


def _random_in(rng, poly, margin_deg: float = 0.002) -> GeoPoint:
    lat0, lon0, lat1, lon1 = poly.bbox
    for _ in range(10_000):
        p = GeoPoint(lat0 + margin_deg + (lat1 - lat0 - 2 * margin_deg) * rng.random(),
                     lon0 + margin_deg + (lon1 - lon0 - 2 * margin_deg) * rng.random())
        if point_in_polygon(p, poly):
            return p
    raise ConfigError("could not sample a point inside a region")


def _make_vocab(rng, zones: list[str], per_zone: int) -> dict[str, list[str]]:
    used = set(COMMON_WORDS)
    vocab = {}
    for z in zones:
        words = []
        while len(words) < per_zone:
            n = int(rng.integers(2, 5))
            w = "".join(_SYLLABLES[int(i)] for i in rng.integers(0, len(_SYLLABLES), n))
            if w not in used:
                used.add(w)
                words.append(w)
        vocab[z] = words
    return vocab


def zone_corpus(seed: int, n_zones: int = 4, docs_per_zone: int = 100, words_per_zone: int = 20,
                crossover: float = 0.15) -> list[tuple[str, str]]:
    """Labeled ``(text, zone)`` documents with per-zone vocabularies.

    Each document mixes 2-5 words of its own zone, 1-3 common words and, with
    probability ``crossover``, one word from another zone.
    """
    rng = np.random.default_rng(seed)
    zones = [f"zone{k}" for k in range(n_zones)]
    vocab = _make_vocab(rng, zones, words_per_zone)
    docs = []
    for z in zones:
        for _ in range(docs_per_zone):
            zw = vocab[z]
            words = [zw[int(i)] for i in rng.integers(0, len(zw), int(rng.integers(2, 6)))]
            words += [COMMON_WORDS[int(i)] for i in rng.integers(0, len(COMMON_WORDS), int(rng.integers(1, 4)))]
            if rng.random() < crossover:
                other = zones[int(rng.integers(0, n_zones))]
                words.append(vocab[other][int(rng.integers(0, words_per_zone))])
            docs.append((" ".join(words[int(i)] for i in rng.permutation(len(words))), z))
    order = rng.permutation(len(docs))
    return [docs[int(i)] for i in order]


def _weighted(rng, weights: dict[str, float]) -> str:
    keys = sorted(weights)
    w = np.array([weights[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=w / w.sum()))]


def default_neighborhood_weights(ids: list[str], favored: dict[str, float]) -> dict[str, float]:
    return {i: favored.get(i, 1.0) for i in ids}


def synth_generate(cfg: SynthConfig) -> SynthResult:
    rng = np.random.default_rng(cfg.seed)
    patches = resolve_patches(cfg.patches)
    by_id = {p.id: p for p in patches}
    if cfg.source_zone not in by_id:
        raise ConfigError(f"source zone {cfg.source_zone!r} is not among the patches")
    nbhds = resolve_neighborhoods(cfg.neighborhoods)
    nb_by_id = {n.id: n for n in nbhds}
    fl_ids = [p.id for p in patches if p.id != cfg.source_zone]

    dest_w = cfg.dest_weights or world.travel_flux_weights()
    for z in dest_w:
        if z not in by_id:
            raise ConfigError(f"dest_weights names unknown zone {z!r}")
    vis_w = cfg.visitor_neighborhood_weights or default_neighborhood_weights(
        sorted(nb_by_id), {"miami-international-airport": 6.0, "marlin-parks": 5.0,
                           "wynwood": 5.0, "intercontinental": 4.5, "miami-beach": 3.5})
    res_w = cfg.resident_neighborhood_weights or default_neighborhood_weights(
        sorted(nb_by_id), {"downtown": 6.0, "miami-beach": 5.0, "wynwood": 3.0,
                           "miami-international-airport": 3.0, "allapattah": 3.0})
    for w in (vis_w, res_w):
        for z in w:
            if z not in nb_by_id:
                raise ConfigError(f"neighborhood weights name unknown neighborhood {z!r}")
    miami = by_id.get(cfg.miami_zone)

    vocab = cfg.vocabulary_per_zone or _make_vocab(rng, [p.id for p in patches], cfg.words_per_zone)
    for z in by_id:
        if not vocab.get(z):
            raise ConfigError(f"no vocabulary for zone {z!r}")

    # shared points of interest; Miami-Dade POIs live inside neighborhoods
    pois: dict[str, list[GeoPoint]] = {}
    for p in patches:
        pois[p.id] = [_random_in(rng, p.geometry) for _ in range(cfg.pois_per_zone)]
    nb_pois = {nid: [_random_in(rng, nb_by_id[nid].geometry) for _ in range(2)]
               for nid in sorted(nb_by_id)}

    start = datetime.fromisoformat(cfg.start).replace(tzinfo=timezone.utc)
    tz = timedelta(hours=cfg.tz_offset_hours)
    pop_w = {z: by_id[z].human_population for z in fl_ids}

    def stamp(day: int, hour: float) -> datetime:
        local = start + timedelta(days=day, hours=hour)
        return (local - tz).replace(microsecond=0)

    def text_for(zone: str) -> str:
        zw = vocab[zone]
        words = [zw[int(i)] for i in rng.integers(0, len(zw), int(rng.integers(2, 6)))]
        words += [COMMON_WORDS[int(i)] for i in rng.integers(0, len(COMMON_WORDS), int(rng.integers(1, 4)))]
        order = rng.permutation(len(words))
        return " ".join(words[int(i)] for i in order)

    events: list[ActivityEvent] = []
    profiles: list[UserProfile] = []
    homes: dict[str, dict] = {}
    trips: dict[str, list[str]] = {}
    corpus: list[tuple[str, str]] = []
    groups: list[str] = []
    width = max(4, len(str(cfg.n_users)))

    for k in range(cfg.n_users):
        uid = f"u{k:0{width}d}"
        u = rng.random()
        if u < cfg.travel_fraction / 2:
            kind = "source_resident"
        elif u < cfg.travel_fraction:
            kind = "fl_traveler"
        else:
            kind = "fl_local"

        home_nb = None
        if kind == "source_resident":
            home_zone = cfg.source_zone
        elif kind == "fl_traveler":
            home_zone = _weighted(rng, dest_w)
        else:
            home_zone = _weighted(rng, pop_w)
        if miami is not None and home_zone == miami.id and nbhds:
            home_nb = _weighted(rng, res_w)
            home = _random_in(rng, nb_by_id[home_nb].geometry, 0.001)
        else:
            home = _random_in(rng, by_id[home_zone].geometry)
        work = _random_in(rng, by_id[home_zone].geometry)

        n_geo = int(rng.integers(cfg.events_per_user[0], cfg.events_per_user[1] + 1))
        rate = cfg.home_rate
        if cfg.home_rate_spread > 0:
            rate = min(1.0, max(0.0, rate + cfg.home_rate_spread * (2 * rng.random() - 1)))
        n_home = int(round(rate * n_geo))
        n_away = n_geo - n_home
        if kind == "fl_local" or n_away == 0:
            n_trip = 0
        else:
            n_trip = min(n_away, int(rng.integers(2, 7)))
        n_work = int(round(cfg.work_share * (n_away - n_trip)))
        n_poi = n_away - n_trip - n_work
        night_worker = rng.random() < cfg.night_worker_rate

        # (timestamp, point, zone)
        recs: list[tuple[datetime, GeoPoint | None, str]] = []
        for _ in range(n_home):
            day = int(rng.integers(0, cfg.span_days))
            if rng.random() < 0.7:
                hour = float((19 + 12 * rng.random()) % 24)
            else:
                hour = 24 * float(rng.random())
            recs.append((stamp(day, hour), _offset(rng, home, HOME_JITTER_M), home_zone))
        for _ in range(n_work):
            day = int(rng.integers(0, cfg.span_days))
            while (start + timedelta(days=day)).weekday() >= 5:
                day = (day + 1) % cfg.span_days
            hour = (20 + 10 * rng.random()) % 24 if night_worker else 8 + 10 * rng.random()
            recs.append((stamp(day, float(hour)), _offset(rng, work, HOME_JITTER_M), home_zone))
        local_pois = pois[home_zone]
        for _ in range(n_poi):
            day = int(rng.integers(0, cfg.span_days))
            p = local_pois[int(rng.integers(0, len(local_pois)))]
            recs.append((stamp(day, 10 + 13 * float(rng.random())), _offset(rng, p, POI_JITTER_M), home_zone))

        visited: set[str] = set()
        if n_trip:
            if kind == "source_resident":
                dests = [_weighted(rng, dest_w)]
                if rng.random() < 0.25:
                    dests.append(_weighted(rng, dest_w))
            else:
                dests = [cfg.source_zone]
            trip_start = int(rng.integers(0, max(1, cfg.span_days - 10)))
            for t in range(n_trip):
                dz = dests[t % len(dests)]
                if miami is not None and dz == miami.id and nb_pois:
                    p = nb_pois[_weighted(rng, vis_w)][int(rng.integers(0, 2))]
                else:
                    p = pois[dz][int(rng.integers(0, len(pois[dz])))]
                day = trip_start + int(rng.integers(0, 10))
                recs.append((stamp(day, 9 + 14 * float(rng.random())), _offset(rng, p, POI_JITTER_M), dz))
                visited.add(dz)

        n_text_only = int(rng.integers(cfg.text_only_per_user[0], cfg.text_only_per_user[1] + 1))
        zones_seen = sorted({z for _, _, z in recs})
        for _ in range(n_text_only):
            z = zones_seen[int(rng.integers(0, len(zones_seen)))]
            recs.append((stamp(int(rng.integers(0, cfg.span_days)), 24 * float(rng.random())), None, z))

        recs.sort(key=lambda r: (r[0], r[1] is None))
        if cfg.max_events_per_user is not None and len(recs) > cfg.max_events_per_user:
            # newest-first retention
            recs = recs[len(recs) - cfg.max_events_per_user:]

        for ts, pt, z in recs:
            text = None
            if pt is None or rng.random() < cfg.text_rate:
                text = text_for(z)
                if pt is not None:
                    corpus.append((z, text))
            events.append(ActivityEvent(uid, ts, pt, text))

        profile_home = home_zone if rng.random() < cfg.profile_rate else None
        if kind == "source_resident":
            profile_home = cfg.source_zone
        profiles.append(UserProfile(uid, profile_home))
        homes[uid] = {"lat": home.lat, "lon": home.lon, "zone": home_zone,
                      "neighborhood": home_nb, "kind": kind}
        trips[uid] = sorted(visited)
        groups.append(home_zone)

    uids = [p.user_id for p in profiles]
    adj: dict[str, list[str]] = {}
    same: dict[str, list[int]] = {}
    for i, g in enumerate(groups):
        same.setdefault(g, []).append(i)
    for i, uid in enumerate(uids):
        k = 1 + int(rng.poisson(4))
        fol = set()
        for _ in range(k):
            pool = same[groups[i]] if rng.random() < 0.7 else range(len(uids))
            j = pool[int(rng.integers(0, len(pool)))]
            if j != i:
                fol.add(uids[j])
        adj[uid] = sorted(fol)

    return SynthResult(events, profiles, SocialGraph(adj), homes, trips, corpus)


def write_synth(result: SynthResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"events": out / "events.jsonl", "profiles": out / "profiles.csv",
             "graph": out / "graph.jsonl", "truth": out / "truth.json", "corpus": out / "corpus.csv"}
    write_events(paths["events"], result.events)
    write_profiles(paths["profiles"], result.profiles)
    write_graph(paths["graph"], result.graph)
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(result.truth_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(paths["corpus"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zone_label", "text"])
        w.writerows(result.corpus)
    return paths
