import math
import random
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from conftest import ev
from vbdrisk import synth
from vbdrisk.errors import ConfigError, ValidationError
from vbdrisk.geo import GeoPoint, haversine_m
from vbdrisk.homeloc import (CascadeConfig, CascadeModel, ClusterRecord, DenseNet, LocationIndex,
                             RandomForest, dbscan_user, extract_records, forest_prune, forest_train,
                             group_by_user, label_records, predict_homes, read_records,
                             scorer_rank, train_cascade, user_records, verifier_decide,
                             write_records)
from vbdrisk.ingest import ActivityEvent

LOCAL = timezone(timedelta(hours=-4))


def at(uid, lat, lon, y, mo, d, h, mi=0):
    return ActivityEvent(uid, datetime(y, mo, d, h, mi, tzinfo=LOCAL).astimezone(timezone.utc),
                         GeoPoint(lat, lon))


# --- clustering -------------------------------------------------------------

def test_one_coordinate_one_cluster():
    cl = dbscan_user([ev("u", 25.0, -80.0, hours=k) for k in range(5)])
    assert len(cl) == 1 and len(cl[0].members) == 5
    assert cl[0].centroid == GeoPoint(25.0, -80.0)


def test_two_groups():
    evs = [ev("u", 25.0, -80.0, hours=k) for k in range(3)]
    evs += [ev("u", 25.009, -80.0, hours=10 + k) for k in range(3)]  # ~1 km north
    assert sorted(len(c.members) for c in dbscan_user(evs)) == [3, 3]


def test_too_few_events():
    assert dbscan_user([ev("u", 25.0, -80.0, hours=k) for k in range(4)]) == []


def _union_find_partition(pts, eps):
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if haversine_m(pts[i], pts[j]) <= eps:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(len(pts)):
        groups.setdefault(find(i), set()).add(i)
    return {frozenset(g) for g in groups.values()}


def _dbscan_partition(pts):
    evs = [ev("u", p.lat, p.lon, hours=k) for k, p in enumerate(pts)]
    where = {id(e): k for k, e in enumerate(evs)}
    return {frozenset(where[id(m)] for m in c.members) for c in dbscan_user(evs, min_events=1)}


@pytest.mark.parametrize("seed", range(40))
def test_dbscan_vs_union_find(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 50)
    lat0, lon0 = rng.uniform(-60, 60), rng.uniform(-170, 170)
    spread = rng.choice([0.001, 0.003, 0.01])
    pts = [GeoPoint(lat0 + rng.uniform(0, spread), lon0 + rng.uniform(0, spread)) for _ in range(n)]
    assert _dbscan_partition(pts) == _union_find_partition(pts, 100.0)
    rng.shuffle(pts)
    assert _dbscan_partition(pts) == _union_find_partition(pts, 100.0)


def test_dbscan_min_pts_noise():
    evs = [ev("u", 25.0, -80.0, hours=k) for k in range(5)] + [ev("u", 26.0, -80.0, hours=9)]
    cl = dbscan_user(evs, min_pts=3)
    assert len(cl) == 1 and len(cl[0].members) == 5


# --- features ---------------------------------------------------------------

A, B, C = (25.80, -80.20), (25.85, -80.20), (25.90, -80.20)


def _fixture_events():
    h = [at("h", *A, 2016, 3, 7, 20), at("h", *A, 2016, 3, 7, 22), at("h", *A, 2016, 3, 12, 2),
         at("h", *B, 2016, 3, 7, 9), at("h", *B, 2016, 3, 8, 10),
         at("h", *C, 2016, 3, 8, 23, 30)]
    o = [at("o", *A, 2016, 3, 1, 12), at("o", 25.8002, -80.2, 2016, 3, 2, 12), at("o", *C, 2016, 3, 3, 12)]
    return h, o


def test_features_hand_fixture():
    h, o = _fixture_events()
    index = LocationIndex(h + o)
    recs = {(r.centroid.lat, r.centroid.lon): r.features.tolist()
            for r in extract_records(dbscan_user(h), index, -4.0)}
    #               f1  f2    f3   f4   f5   f6  f7       f8 f9 f10
    expect = {A: [3, 1 / 2, 2 / 3, 1 / 3, 1 / 3, 2, 4.25, 2, 1, 5 / 9],
              B: [2, 1 / 3, 0, 0, 0, 2, 25 / 24, 0, 0, 2 / 9],
              C: [1, 1 / 6, 1, 0, 0, 1, 0, 1, 1, 2 / 9]}
    assert set(recs) == set(expect)
    for k, v in expect.items():
        assert recs[k] == pytest.approx(v, abs=1e-12)


def test_single_cluster_fraction_and_evening():
    evs = [at("u", 25.0, -80.0, 2016, 3, d, 20) for d in range(1, 6)]
    (r,) = extract_records(dbscan_user(evs), LocationIndex(evs), -4.0)
    assert r.features[1] == 1.0 and r.features[2] == 1.0


def test_missing_tz_warns(caplog):
    evs = [at("u", 25.0, -80.0, 2016, 3, d, 20) for d in range(1, 6)]
    (r,) = extract_records(dbscan_user(evs), LocationIndex(evs), None)
    assert "timezone" in caplog.text and r.features[2] == 1.0


def test_records_roundtrip(tmp_path):
    h, o = _fixture_events()
    recs = extract_records(dbscan_user(h), LocationIndex(h + o), -4.0)
    recs[0].label = True
    write_records(tmp_path / "r.csv", recs)
    back = read_records(tmp_path / "r.csv")
    assert [r.features.tolist() for r in back] == [r.features.tolist() for r in recs]
    assert [r.label for r in back] == [True, None, None]


# --- cascade stages ---------------------------------------------------------

def _rec(uid, k, feats, label=None, t=0.0):
    return ClusterRecord(uid, k, GeoPoint(25.0, -80.0 + k * 0.01), t, np.asarray(feats, float), label)


def test_forest_single_class():
    with pytest.raises(ValidationError):
        forest_train([_rec("u", 0, np.ones(10), True), _rec("v", 0, np.zeros(10), True)])


def test_forest_keeps_training_home():
    rng = np.random.default_rng(0)
    recs = [_rec(f"u{k}", 0, rng.normal(size=10), bool(k % 3 == 0)) for k in range(60)]
    forest = forest_train(recs, seed=1, n_trees=25)
    homes = [r for r in recs if r.label]
    assert forest_prune(homes, forest) == homes
    odd = [_rec("z", 0, np.zeros(10) - 1e6)]
    assert forest_prune(odd, forest) == forest_prune(odd, forest)
    f2 = RandomForest.from_json(forest.to_json())
    assert np.array_equal(f2.votes(np.stack([r.features for r in recs])),
                          forest.votes(np.stack([r.features for r in recs])))


class _Fixed:
    def __init__(self, p):
        self.p = np.asarray(p, float)

    def predict_proba(self, X):
        return self.p[: len(X)]


def test_scorer_rank_rules():
    one = [_rec("u", 0, np.zeros(10))]
    assert scorer_rank(one, _Fixed([0.01]), 0.0, 1.0)[0] is one[0]
    two = [_rec("u", 0, np.zeros(10)), _rec("u", 1, np.zeros(10))]
    assert scorer_rank(two, _Fixed([0.9, 0.2]), 0.0, 1.0)[0] is two[0]
    tie = [_rec("u", 0, np.zeros(10), t=5.0), _rec("u", 1, np.zeros(10), t=1.0)]
    assert scorer_rank(tie, _Fixed([0.5, 0.5]), 0.0, 1.0)[0] is tie[1]


def test_verifier_threshold():
    r = _rec("u", 0, np.zeros(10))
    assert verifier_decide(r, 0.51).verdict == "home"
    assert verifier_decide(r, 0.51).home == r.centroid
    assert verifier_decide(r, 0.5).verdict == "unknown"


def test_net_layers_and_determinism():
    net = DenseNet(10, seed=3)
    assert net.n_dense == 5 and net.n_dropout == 4
    X = np.random.default_rng(0).normal(size=(40, 10))
    y = (X[:, 0] > 0).astype(float)
    a, b = DenseNet(10, seed=3), DenseNet(10, seed=3)
    assert a.fit(X, y, "rmsprop", epochs=5) == b.fit(X, y, "rmsprop", epochs=5)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))  # dropout off at inference
    assert np.array_equal(a.predict_proba(X), a.predict_proba(X))


# --- end to end on a small synthetic set ------------------------------------

@pytest.fixture(scope="module")
def trained():
    data = synth.synth_generate(synth.SynthConfig(seed=7, n_users=200, home_rate_spread=0.6))
    recs = user_records(group_by_user(data.events), LocationIndex(data.events), -4.0)
    flat = [r for u in sorted(recs) for r in recs[u]]
    label_records(flat, data.homes)
    cfg = CascadeConfig(n_trees=40)
    return train_cascade(flat, seed=5, config=cfg), flat, data


def test_prune_recall(trained):
    model, flat, _ = trained
    kept = forest_prune(flat, model.forest)
    homes = [r for r in flat if r.label]
    kept_ids = {id(r) for r in kept}
    recall = np.mean([id(r) in kept_ids for r in homes])
    assert recall >= 0.95 and len(kept) <= 0.7 * len(flat)


def test_scores_separate_classes(trained):
    model, flat, _ = trained
    X = model.normalize(np.stack([r.features for r in flat]))
    p = model.scorer.predict_proba(X)
    lab = np.array([bool(r.label) for r in flat])
    assert p[lab].mean() > p[~lab].mean()


def test_predict_homes(trained, tmp_path):
    model, _, data = trained
    centre = GeoPoint(25.72, -80.30)
    rng = np.random.default_rng(1)
    mine = []
    for k in range(5):
        d, ang = rng.uniform(0, 20), rng.uniform(0, 2 * math.pi)
        lat = centre.lat + d * math.cos(ang) / 111_195
        lon = centre.lon + d * math.sin(ang) / (111_195 * math.cos(math.radians(centre.lat)))
        mine.append(at("zz-new", lat, lon, 2016, 4, 1 + k, 21))
    few = [ev("zz-few", 25.7, -80.3, hours=k) for k in range(4)]
    events = data.events + mine + few
    preds = {p.user_id: p for p in predict_homes(events, model)}
    assert preds["zz-few"].verdict == "unknown"
    assert preds["zz-new"].verdict == "home"
    assert haversine_m(preds["zz-new"].home, centre) <= 100.0
    again = predict_homes(events, model, jobs=3)
    assert [p.to_json() for p in again] == [preds[u].to_json() for u in sorted(preds)]
    model.save(tmp_path / "m.json")
    loaded = CascadeModel.load(tmp_path / "m.json")
    assert [p.to_json() for p in predict_homes(events, loaded)] == [p.to_json() for p in again]


def test_untrained_model():
    with pytest.raises(ConfigError):
        predict_homes([ev("u", 1, 1)], None)


def test_training_is_reproducible():
    data = synth.synth_generate(synth.SynthConfig(seed=9, n_users=60, home_rate_spread=0.6))
    recs = user_records(group_by_user(data.events), LocationIndex(data.events), -4.0)
    flat = [r for u in sorted(recs) for r in recs[u]]
    label_records(flat, data.homes)
    cfg = CascadeConfig(n_trees=10, scorer_epochs=5, verifier_epochs=5)
    a = train_cascade(flat, seed=2, config=cfg).to_json()
    b = train_cascade(flat, seed=2, config=cfg).to_json()
    assert a == b
