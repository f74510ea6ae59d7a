"""Neighborhood shares of visitor activity and resident homes, the
both-criteria high-risk set, and report files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import EmptySampleError, VbdError
from .geo import Neighborhood, Patch, locate, regions_to_geojson
from .homeloc.cascade import HomePrediction
from .ingest import ActivityEvent, UserProfile

OTHER = "other"


@dataclass
class ShareTable:
    kind: str  # "visitor-visits", "visitor-users" or "resident-homes"
    counts: dict[str, int]
    denominator: int
    other: int = 0

    def rows(self) -> list[tuple[str, float]]:
        """(neighborhood id, percentage) sorted by share descending, then id."""
        items = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return [(k, 100.0 * c / self.denominator) for k, c in items if c > 0]

    def share(self, nid: str) -> Fraction:
        return Fraction(self.counts.get(nid, 0), self.denominator)

    def other_pct(self) -> float:
        return 100.0 * self.other / self.denominator

    def top(self, k: int) -> set[str]:
        """Top-k ids; every row tied with the k-th row is included."""
        items = [(kk, c) for kk, c in self.counts.items() if c > 0]
        items.sort(key=lambda kv: (-kv[1], kv[0]))
        if not items:
            return set()
        if len(items) <= k:
            return {kk for kk, _ in items}
        cutoff = items[k - 1][1]
        return {kk for kk, c in items if c >= cutoff}


@dataclass(frozen=True)
class RiskSet:
    neighborhoods: frozenset[str]
    criterion: str = "both"


def source_resident_events(events: Iterable[ActivityEvent], profiles: Mapping[str, UserProfile],
                           source_zone: str) -> list[ActivityEvent]:
    return [ev for ev in events
            if ev.user_id in profiles and profiles[ev.user_id].profile_home == source_zone]


def visitor_shares(events: Iterable[ActivityEvent], neighborhoods: Sequence[Neighborhood],
                   per_user: bool = False) -> ShareTable:
    """Share of located geo events per neighborhood (or of users, with
    ``per_user``).  Events outside every neighborhood go to the "other"
    bucket, which stays in the denominator."""
    counts = {n.id: 0 for n in neighborhoods}
    other = 0
    if per_user:
        seen: dict[str, set[str]] = {}
        for ev in events:
            if ev.geo is None:
                continue
            seen.setdefault(ev.user_id, set()).add(locate(ev.geo, neighborhoods) or OTHER)
        for zs in seen.values():
            for z in zs:
                if z == OTHER:
                    other += 1
                else:
                    counts[z] += 1
        denom = len(seen)
        kind = "visitor-users"
    else:
        denom = 0
        for ev in events:
            if ev.geo is None:
                continue
            denom += 1
            z = locate(ev.geo, neighborhoods)
            if z is None:
                other += 1
            else:
                counts[z] += 1
        kind = "visitor-visits"
    if denom == 0:
        raise EmptySampleError("no geo-tagged visitor events to aggregate")
    return ShareTable(kind, counts, denom, other)


def resident_shares(predictions: Iterable[HomePrediction],
                    neighborhoods: Sequence[Neighborhood]) -> ShareTable:
    """Share of accepted homes per neighborhood; unknown verdicts are ignored."""
    counts = {n.id: 0 for n in neighborhoods}
    other = 0
    denom = 0
    for p in predictions:
        if p.home is None:
            continue
        denom += 1
        z = locate(p.home, neighborhoods)
        if z is None:
            other += 1
        else:
            counts[z] += 1
    if denom == 0:
        raise EmptySampleError("no accepted home predictions")
    return ShareTable("resident-homes", counts, denom, other)


def intersect_high_risk(visitors: ShareTable, residents: ShareTable, top_k: int = 5) -> RiskSet:
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    return RiskSet(frozenset(visitors.top(top_k) & residents.top(top_k)), "both")


def union_high_risk(visitors: ShareTable, residents: ShareTable, top_k: int = 5) -> RiskSet:
    return RiskSet(frozenset(visitors.top(top_k) | residents.top(top_k)), "either")


# --- report -----------------------------------------------------------------

def write_county_risk(path: Path, ranked: Sequence[tuple[str, float]], steady_ih: Mapping[str, float]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patch_id", "I_h_steady", "risk"])
        for pid, risk in ranked:
            w.writerow([pid, repr(float(steady_ih[pid])), repr(float(risk))])


def read_county_risk(path: str | Path) -> tuple[list[tuple[str, float]], dict[str, float]]:
    ranked, ih = [], {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ranked.append((row["patch_id"], float(row["risk"])))
            ih[row["patch_id"]] = float(row["I_h_steady"])
    return ranked, ih


def emit_report(out_dir: str | Path, tables: Sequence[ShareTable], risk_set: RiskSet,
                neighborhoods: Sequence[Neighborhood] = (),
                county_ranked: Sequence[tuple[str, float]] | None = None,
                steady_ih: Mapping[str, float] | None = None,
                patches: Sequence[Patch] = ()) -> dict[str, Path]:
    """Write the report files; identical inputs give identical bytes."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise VbdError(f"cannot create output directory {out}: {exc}") from None
    written = {}
    names = {n.id: n.name for n in neighborhoods}

    if county_ranked is not None:
        p = out / "county_risk.csv"
        write_county_risk(p, county_ranked, steady_ih or {})
        written["county_risk.csv"] = p
        risk = dict(county_ranked)
        extra = {pid: {"risk": risk.get(pid, 0.0), "relative_risk": True} for pid in (x.id for x in patches)}
        p = out / "county_risk.geojson"
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(regions_to_geojson(patches, extra), fh, indent=1, sort_keys=True)
            fh.write("\n")
        written["county_risk.geojson"] = p

    p = out / "neighborhood_shares.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "neighborhood_id", "name", "count", "denominator", "percentage"])
        for t in tables:
            for nid, pct in t.rows():
                w.writerow([t.kind, nid, names.get(nid, nid), t.counts[nid], t.denominator, f"{pct:.1f}"])
            w.writerow([t.kind, OTHER, OTHER, t.other, t.denominator, f"{t.other_pct():.1f}"])
    written["neighborhood_shares.csv"] = p

    p = out / "risk_set.json"
    with open(p, "w", encoding="utf-8") as fh:
        json.dump({"criterion": risk_set.criterion,
                   "neighborhoods": sorted(risk_set.neighborhoods),
                   "names": [names.get(n, n) for n in sorted(risk_set.neighborhoods)]},
                  fh, indent=1, sort_keys=True)
        fh.write("\n")
    written["risk_set.json"] = p
    return written
