"""Population flux from the source zone into destination patches.

Per-user zone visit sets come from geo-tags (point-in-polygon) and, above a
confidence threshold, from text geolocation.  The share of source-and-
destination users seen in each patch is scaled by the air-traffic volume and
finally divided by patch populations to give per-capita daily rates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coarsegeo import ZoneModel, predict_many
from .errors import EmptySampleError, ValidationError
from .geo import Patch, locate
from .ingest import ActivityEvent


@dataclass(frozen=True)
class VisitSet:
    user_id: str
    zones_visited: frozenset[str]


@dataclass
class FluxMatrix:
    ids: list[str]
    alpha: np.ndarray  # alpha[i, j]: per-capita rate from patch i to patch j, 1/day

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        z = len(self.ids)
        if self.alpha.shape != (z, z):
            raise ValidationError(f"flux matrix must be {z}x{z}, got {self.alpha.shape}")
        if np.any(self.alpha < 0) or not np.all(np.isfinite(self.alpha)):
            raise ValidationError("flux rates must be finite and non-negative")
        if np.any(np.diag(self.alpha) != 0):
            raise ValidationError("flux matrix diagonal must be zero")

    @classmethod
    def zeros(cls, ids: Sequence[str]) -> "FluxMatrix":
        return cls(list(ids), np.zeros((len(ids), len(ids))))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["from", "to", "rate_per_day"])
            for i, j in zip(*np.nonzero(self.alpha)):
                w.writerow([self.ids[i], self.ids[j], repr(float(self.alpha[i, j]))])

    @classmethod
    def from_csv(cls, path: str | Path, ids: Sequence[str]) -> "FluxMatrix":
        index = {p: k for k, p in enumerate(ids)}
        alpha = np.zeros((len(ids), len(ids)))
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["from", "to", "rate_per_day"]:
                raise ValidationError(f"{path}: expected header from,to,rate_per_day")
            for row in reader:
                try:
                    i, j = index[row["from"]], index[row["to"]]
                except KeyError as exc:
                    raise ValidationError(f"{path}: unknown patch {exc.args[0]!r}") from None
                alpha[i, j] += float(row["rate_per_day"])
        return cls(list(ids), alpha)


def build_visit_sets(events: Iterable[ActivityEvent], zones: Sequence[Patch],
                     min_confidence: float = 0.5, model: ZoneModel | None = None) -> list[VisitSet]:
    """Visit sets per user in order of first appearance; users with nothing
    locatable are left out.  Text-only events are ignored when ``model`` is None."""
    if not 0.0 <= min_confidence <= 1.0:
        raise ValidationError("min_confidence must lie in [0, 1]")
    seen: dict[str, set[str]] = {}
    text_events: list[ActivityEvent] = []
    for ev in events:
        zs = seen.setdefault(ev.user_id, set())
        if ev.geo is not None:
            z = locate(ev.geo, zones)
            if z is not None:
                zs.add(z)
        elif ev.text is not None and model is not None:
            text_events.append(ev)
    if text_events:
        for ev, (zone, conf) in zip(text_events, predict_many([e.text for e in text_events], model)):
            if conf >= min_confidence:
                seen[ev.user_id].add(zone)
    return [VisitSet(u, frozenset(zs)) for u, zs in seen.items() if zs]


def estimate_source_flux(visit_sets: Iterable[VisitSet], source_zone: str,
                         dest_patches: Sequence[str], air_volume: float) -> dict[str, float]:
    """Persons/day from the source into each destination patch.

    A user seen in the source and in k destinations counts toward all k, so the
    fluxes may sum to more than ``air_volume``.
    """
    if not air_volume >= 0:
        raise ValidationError("air_volume must be non-negative")
    dests = set(dest_patches)
    counts = dict.fromkeys(dest_patches, 0)
    n_users = 0
    for vs in visit_sets:
        if source_zone not in vs.zones_visited:
            continue
        hit = vs.zones_visited & dests
        if not hit:
            continue
        n_users += 1
        for z in hit:
            counts[z] += 1
    if n_users == 0:
        raise EmptySampleError(f"no user visited both {source_zone!r} and a destination patch")
    return {z: counts[z] / n_users * air_volume for z in dest_patches}


def to_rate_matrix(flux: Mapping[str, float], patches: Sequence[Patch], source_patch: str,
                   return_factor: float = 1.0) -> FluxMatrix:
    """Per-capita rates: alpha[source, i] = flux_i / N_source and, for the return
    leg, alpha[i, source] = return_factor * flux_i / N_i."""
    if not 0.0 <= return_factor <= 1.0:
        raise ValidationError("return_factor must lie in [0, 1]")
    ids = [p.id for p in patches]
    index = {p: k for k, p in enumerate(ids)}
    if source_patch not in index:
        raise ValidationError(f"source patch {source_patch!r} not in patch list")
    s = index[source_patch]
    n_src = patches[s].human_population
    if not n_src > 0:
        raise ValidationError("source population must be positive")
    alpha = np.zeros((len(ids), len(ids)))
    for pid, f in flux.items():
        if pid == source_patch:
            continue
        if pid not in index:
            raise ValidationError(f"flux names unknown patch {pid!r}")
        if f < 0:
            raise ValidationError(f"negative flux for {pid!r}")
        i = index[pid]
        alpha[s, i] = f / n_src
        alpha[i, s] = return_factor * f / patches[i].human_population
    return FluxMatrix(ids, alpha)


def write_flux_vector(path: str | Path, flux: Mapping[str, float], source: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "persons_per_day"])
        for pid in sorted(flux):
            w.writerow([source, pid, repr(float(flux[pid]))])
