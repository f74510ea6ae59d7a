"""Prune / score / verify cascade that turns cluster records into a home
location or an "unknown" verdict per user."""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError, ValidationError
from ..geo import GeoPoint, haversine_m
from ..ingest import ActivityEvent
from .clustering import EPS_M, MIN_GEO_EVENTS, dbscan_user, group_by_user
from .features import DEFAULT_TZ_OFFSET, ClusterRecord, LocationIndex, extract_records
from .forest import RandomForest
from .nets import DEFAULT_WIDTHS, DenseNet

log = logging.getLogger(__name__)

ACCEPT_THRESHOLD = 0.5
_N_CONTEXT = 3  # scorer probability, margin to runner-up, log record count


@dataclass
class CascadeConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    dropout: float = 0.3
    scorer_epochs: int = 60
    scorer_lr: float = 0.01
    verifier_epochs: int = 60
    verifier_lr: float = 1e-3
    batch_size: int = 32
    folds: int = 2

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["widths"] = list(self.widths)
        return d


@dataclass
class HomePrediction:
    user_id: str
    home: GeoPoint | None
    score: float

    @property
    def verdict(self) -> str:
        return "unknown" if self.home is None else "home"

    def to_json(self) -> dict:
        d = {"user_id": self.user_id, "verdict": self.verdict, "score": self.score}
        if self.home is not None:
            d["lat"] = self.home.lat
            d["lon"] = self.home.lon
        return d

    @classmethod
    def from_json(cls, d: dict) -> "HomePrediction":
        home = GeoPoint(float(d["lat"]), float(d["lon"])) if d.get("verdict") == "home" else None
        return cls(str(d["user_id"]), home, float(d.get("score", 0.0)))


@dataclass
class CascadeModel:
    forest: RandomForest
    scorer: DenseNet
    verifier: DenseNet
    mean: np.ndarray
    std: np.ndarray
    seed: int
    config: CascadeConfig = field(default_factory=CascadeConfig)
    tz_offset: float = DEFAULT_TZ_OFFSET

    def normalize(self, F: np.ndarray) -> np.ndarray:
        return (np.asarray(F, float) - self.mean) / self.std

    def to_json(self) -> dict:
        return {"forest": self.forest.to_json(), "scorer": self.scorer.to_json(),
                "verifier": self.verifier.to_json(), "mean": self.mean.tolist(),
                "std": self.std.tolist(), "seed": self.seed, "config": self.config.to_dict(),
                "tz_offset": self.tz_offset}

    @classmethod
    def from_json(cls, d: dict) -> "CascadeModel":
        cfg = dict(d.get("config", {}))
        if "widths" in cfg:
            cfg["widths"] = tuple(cfg["widths"])
        return cls(RandomForest.from_json(d["forest"]), DenseNet.from_json(d["scorer"]),
                   DenseNet.from_json(d["verifier"]), np.array(d["mean"], float),
                   np.array(d["std"], float), int(d["seed"]), CascadeConfig(**cfg),
                   float(d.get("tz_offset", DEFAULT_TZ_OFFSET)))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str | Path) -> "CascadeModel":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(json.load(fh))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: not a trained cascade bundle ({exc})") from None


# --- stages -----------------------------------------------------------------

def _matrix(records: Sequence[ClusterRecord]) -> np.ndarray:
    return np.array([r.features for r in records], dtype=float).reshape(len(records), 10)


def _labels(records: Sequence[ClusterRecord]) -> np.ndarray:
    if any(r.label is None for r in records):
        raise ValidationError("training records must all carry a label")
    return np.array([float(r.label) for r in records])


def forest_train(records: Sequence[ClusterRecord], seed: int = 0, n_trees: int = 100,
                 max_depth: int | None = None, min_samples_leaf: int = 1) -> RandomForest:
    y = _labels(records)
    if len(np.unique(y)) < 2:
        raise ValidationError("forest training data must contain both classes")
    return RandomForest(n_trees, None, max_depth, min_samples_leaf, seed).fit(_matrix(records), y)


def forest_prune(records: Sequence[ClusterRecord], forest: RandomForest) -> list[ClusterRecord]:
    """Keep records that at least one tree votes home on."""
    if not records:
        return []
    keep = forest.keep_mask(_matrix(records))
    return [r for r, k in zip(records, keep) if k]


def _by_user(records: Sequence[ClusterRecord]) -> dict[str, list[ClusterRecord]]:
    out: dict[str, list[ClusterRecord]] = defaultdict(list)
    for r in records:
        out[r.user_id].append(r)
    return out


def scorer_train(records: Sequence[ClusterRecord], mean, std, seed: int = 0,
                 config: CascadeConfig | None = None) -> DenseNet:
    cfg = config or CascadeConfig()
    net = DenseNet(10, cfg.widths, cfg.dropout, seed)
    net.fit((_matrix(records) - mean) / std, _labels(records), "sgd", cfg.scorer_epochs,
            cfg.batch_size, cfg.scorer_lr)
    return net


def scorer_rank(user_records: Sequence[ClusterRecord], scorer: DenseNet, mean, std):
    """Best record for one user plus context for the verifier.

    Returns ``(record, probability, margin, n_records)``; ties go to the
    record whose first event is earliest.
    """
    if not user_records:
        raise ValidationError("no records to rank")
    p = scorer.predict_proba((_matrix(user_records) - mean) / std)
    order = sorted(range(len(user_records)),
                   key=lambda i: (-p[i], user_records[i].first_time, user_records[i].cluster))
    best = order[0]
    margin = p[best] - p[order[1]] if len(order) > 1 else p[best]
    return user_records[best], float(p[best]), float(margin), len(user_records)


def _verifier_input(rec, prob, margin, n, mean, std) -> np.ndarray:
    z = (rec.features - mean) / std
    return np.concatenate([z, [prob, margin, np.log1p(n)]])


def verifier_train(X: np.ndarray, y: np.ndarray, seed: int = 0,
                   config: CascadeConfig | None = None) -> DenseNet:
    cfg = config or CascadeConfig()
    if len(y) == 0:
        raise ValidationError("no candidates to train the verifier on")
    net = DenseNet(X.shape[1], cfg.widths, cfg.dropout, seed)
    net.fit(X, y, "rmsprop", cfg.verifier_epochs, cfg.batch_size, cfg.verifier_lr)
    return net


def verifier_decide(candidate: ClusterRecord, probability: float) -> HomePrediction:
    """Strictly above 0.5 accepts the candidate's centroid; anything else is unknown."""
    if probability > ACCEPT_THRESHOLD and candidate.centroid is not None:
        return HomePrediction(candidate.user_id, candidate.centroid, float(probability))
    return HomePrediction(candidate.user_id, None, float(probability))


# --- training ---------------------------------------------------------------

def _candidates(records, forest, scorer, mean, std):
    rows, labels = [], []
    for uid, recs in sorted(_by_user(forest_prune(records, forest)).items()):
        rec, prob, margin, n = scorer_rank(recs, scorer, mean, std)
        rows.append(_verifier_input(rec, prob, margin, n, mean, std))
        labels.append(float(bool(rec.label)))
    return np.array(rows).reshape(len(rows), 10 + _N_CONTEXT), np.array(labels)


def train_cascade(records: Sequence[ClusterRecord], seed: int = 0,
                  config: CascadeConfig | None = None,
                  tz_offset: float = DEFAULT_TZ_OFFSET) -> CascadeModel:
    """Fit forest, scorer and verifier on labeled records.

    The verifier learns from out-of-fold candidates: users are split into
    ``folds`` groups and each group's candidates come from a scorer that never
    saw it, so the verifier sees realistic mistakes.
    """
    cfg = config or CascadeConfig()
    records = list(records)
    y = _labels(records)
    if len(np.unique(y)) < 2:
        raise ValidationError("training records must contain both home and non-home labels")
    F = _matrix(records)
    mean = F.mean(axis=0)
    std = F.std(axis=0)
    std[std == 0] = 1.0
    rng = np.random.default_rng(seed)
    seeds = [int(s) for s in rng.integers(0, 2**31, size=4 + cfg.folds)]

    forest = forest_train(records, seeds[0], cfg.n_trees, cfg.max_depth, cfg.min_samples_leaf)
    survivors = forest_prune(records, forest)
    if not survivors or len({r.label for r in survivors}) < 2:
        raise ValidationError("pruned training set lost one of the classes")
    scorer = scorer_train(survivors, mean, std, seeds[1], cfg)

    users = sorted({r.user_id for r in records})
    fold_of = {u: k % cfg.folds for k, u in enumerate(rng.permutation(users).tolist())}
    Xv, yv = [], []
    for k in range(cfg.folds):
        fit_part = [r for r in survivors if fold_of[r.user_id] != k]
        held = [r for r in records if fold_of[r.user_id] == k]
        if cfg.folds > 1 and fit_part and len({r.label for r in fit_part}) == 2:
            fold_scorer = scorer_train(fit_part, mean, std, seeds[4 + k], cfg)
        else:
            fold_scorer = scorer
        X, yk = _candidates(held, forest, fold_scorer, mean, std)
        Xv.append(X)
        yv.append(yk)
    Xv = np.concatenate(Xv)
    yv = np.concatenate(yv)
    verifier = verifier_train(Xv, yv, seeds[2], cfg)
    return CascadeModel(forest, scorer, verifier, mean, std, seed, cfg, tz_offset)


# --- inference --------------------------------------------------------------

def user_records(events_by_user: dict[str, list[ActivityEvent]], index: LocationIndex,
                 tz_offset: float, eps_m: float = EPS_M) -> dict[str, list[ClusterRecord]]:
    out = {}
    for uid in sorted(events_by_user):
        clusters = dbscan_user(events_by_user[uid], eps_m)
        out[uid] = extract_records(clusters, index, tz_offset)
    return out


def label_records(records: Sequence[ClusterRecord], homes: dict[str, dict],
                  radius_m: float = EPS_M) -> None:
    """Mark, per user, the cluster nearest the planted home (if within ``radius_m``)."""
    for uid, recs in _by_user(records).items():
        truth = homes.get(uid)
        for r in recs:
            r.label = False
        if truth is None:
            continue
        home = GeoPoint(truth["lat"], truth["lon"])
        dists = [haversine_m(r.centroid, home) for r in recs]
        k = int(np.argmin(dists))
        if dists[k] <= radius_m:
            recs[k].label = True


def predict_user(records: Sequence[ClusterRecord], model: CascadeModel, uid: str) -> HomePrediction:
    survivors = forest_prune(records, model.forest)
    if not survivors:
        return HomePrediction(uid, None, 0.0)
    rec, prob, margin, n = scorer_rank(survivors, model.scorer, model.mean, model.std)
    x = _verifier_input(rec, prob, margin, n, model.mean, model.std)
    return verifier_decide(rec, float(model.verifier.predict_proba(x[None, :])[0]))


def predict_homes(events: Sequence[ActivityEvent], model: CascadeModel | None,
                  index: LocationIndex | None = None, jobs: int = 1) -> list[HomePrediction]:
    """One prediction per user (sorted by id); fewer than five geo-tags -> unknown."""
    if model is None or not getattr(model.forest, "trees", None):
        raise ConfigError("cascade model is not trained")
    by_user = group_by_user(events)
    index = index or LocationIndex(events)

    def one(uid: str) -> HomePrediction:
        evs = by_user[uid]
        if sum(ev.geo is not None for ev in evs) < MIN_GEO_EVENTS:
            return HomePrediction(uid, None, 0.0)
        recs = extract_records(dbscan_user(evs), index, model.tz_offset)
        return predict_user(recs, model, uid)

    uids = sorted(by_user)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, uids))
    return [one(u) for u in uids]


def write_predictions(path: str | Path, preds: Sequence[HomePrediction]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([p.to_json() for p in preds], fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_predictions(path: str | Path) -> list[HomePrediction]:
    with open(path, encoding="utf-8") as fh:
        return [HomePrediction.from_json(d) for d in json.load(fh)]
