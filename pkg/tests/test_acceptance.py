"""The ten acceptance criteria, one test each, at their stated tolerances."""

import json
import random
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

import epi_helpers as H
import riskmap_fixtures as F
from test_homeloc import _dbscan_partition, _union_find_partition
from vbdrisk import coarsegeo, homeloc, synth, world
from vbdrisk.cli import build_records, main
from vbdrisk.epimodel import (EpiParams, EpiState, PatchGraph, initial_state, integrate_to_steady,
                              rank_patches, risk_scores, rhs, step_rk4)
from vbdrisk.flux import VisitSet, estimate_source_flux
from vbdrisk.geo import GeoPoint, haversine_m
from vbdrisk.riskmap import intersect_high_risk, resident_shares, visitor_shares

ROOT = Path(__file__).resolve().parents[1]
P = EpiParams()


def test_c01_county_ranking(criterion):
    t0 = time.perf_counter()
    patches, rates = H.table4_graph(air_volume=8000.0)
    g = PatchGraph(patches, rates)
    ss = integrate_to_steady(initial_state(g, world.SOURCE_ID, 1e-3, P), g, P, pinned=world.SOURCE_ID)
    elapsed = time.perf_counter() - t0
    ranked = rank_patches(risk_scores(ss), exclude=[world.SOURCE_ID])
    risk = dict(ranked)
    counties = [world.slug(k) for k in world.TOTAL_CASES]
    rho = spearmanr([risk[c] for c in counties], list(world.TOTAL_CASES.values())).statistic
    first = ranked[0][0] == world.MIAMI_ID and ranked[0][1] > ranked[1][1]
    ok = first and rho >= 0.8 and elapsed <= 60.0
    criterion(1, ok, f"top={ranked[0][0]} strict={first} spearman={rho:.3f} runtime={elapsed:.1f}s")
    assert ok


def test_c02_ode_correctness(criterion):
    rng = np.random.default_rng(2)
    g = H.graph(H.patches(3, [5000, 20000, 8000]), H.random_alpha(rng, 3, 0.02))
    y = H.susceptible(g).y
    y[2, 1], y[0, 1] = 50.0, y[0, 1] - 50.0
    s = EpiState(y)
    for _ in range(4000):
        s = step_rk4(s, g, P, 0.05)
    ref = H.euler_oracle(EpiState(y), g, P, 200.0, 1e-4)
    rel = float(np.max(np.abs(s.y - ref) / np.maximum(np.abs(ref), 1.0)))

    g1 = H.graph(H.patches(1, vector_ratio=0.0))
    y1 = np.zeros((7, 1))
    y1[2, 0] = 100.0
    decay = step_rk4(EpiState(y1), g1, EpiParams(b=0.0, delta=0.0), 0.1)["I_h"][0]
    err = abs(decay - 100 * np.exp(-0.025))
    ok = rel <= 1e-4 and err <= 1e-8
    criterion(2, ok, f"rk4-vs-euler max rel diff={rel:.2e} (<=1e-4); decay error={err:.1e} (<=1e-8)")
    assert ok


def test_c03_conservation(criterion):
    rng = np.random.default_rng(3)
    ps = H.patches(6)
    g = H.graph(ps, H.random_alpha(rng, 6, 0.05))
    y = H.susceptible(g).y
    y[2, 2], y[0, 2] = 30.0, y[0, 2] - 30.0
    y[5] *= 0.6  # vectors start below capacity
    total0 = y[:5].sum()
    s = EpiState(y)
    for _ in range(10_000):
        s = step_rk4(s, g, P, 0.1)
    drift = abs(s.y[:5].sum() - total0) / total0

    ss = integrate_to_steady(EpiState(y), g, P)
    nv = ss.state["S_v"] + ss.state["I_v"]
    vec = float(np.max(np.abs(nv - g.nv) / g.nv))

    gb = H.graph(ps, H.balanced_alpha(rng, g.nh))
    dfe = H.susceptible(gb)
    d = rhs(dfe, gb, P)
    res = float(np.max(np.abs(d)) / np.max(dfe.y))
    ok = drift <= 1e-8 and vec <= 1e-6 and res <= 1e-15 and ss.converged
    criterion(3, ok, f"human drift={drift:.1e} (<=1e-8); vector total rel err={vec:.1e} (<=1e-6); "
                     f"DFE residual={res:.1e}")
    assert ok


def test_c04_monotone_in_influx(criterion):
    worst = np.inf
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        z = 6
        ps = H.patches(z, rng.uniform(2e3, 5e4, z).tolist(), vector_ratio=float(rng.uniform(0.5, 3)))
        nh = [p.human_population for p in ps]
        # balanced county-to-county mixing plus a source <-> county star with return legs
        a = H.balanced_alpha(rng, nh, 0.01, 0.6)
        for i in range(1, z):
            f = rng.uniform(5.0, 100.0)
            a[0, i], a[i, 0] = f / nh[0], f / nh[i]
        doubled = a.copy()
        doubled[0, 1:] *= 2.0
        out = []
        for alpha in (a, doubled):
            g = H.graph(ps, alpha)
            ss = integrate_to_steady(initial_state(g, "p0", 1e-3, P), g, P, pinned="p0")
            assert ss.converged
            out.append(ss.state["I_h"][1:])
        worst = min(worst, float(np.min(out[1] - out[0])))
    ok = worst >= 0.0
    criterion(4, ok, f"20 seeds, doubled source out-flux: min change in steady I_h={worst:.3f} (>=0)")
    assert ok


def test_c05_dbscan_oracle(criterion):
    rng = random.Random(55)
    bad = 0
    for _ in range(500):
        n = rng.randint(1, 50)
        lat0, lon0 = rng.uniform(-70, 70), rng.uniform(-179, 179)
        spread = rng.choice([0.0005, 0.002, 0.005, 0.02])
        pts = [GeoPoint(lat0 + rng.uniform(0, spread), lon0 + rng.uniform(0, spread)) for _ in range(n)]
        bad += _dbscan_partition(pts) != _union_find_partition(pts, 100.0)
    criterion(5, bad == 0, f"{500 - bad}/500 instances match the union-find oracle")
    assert bad == 0


def _g1_cascade():
    train = synth.synth_generate(synth.SynthConfig(seed=7, n_users=500, home_rate=0.6, home_rate_spread=0.6))
    model = homeloc.train_cascade(build_records(train.events, -4.0, train.homes), seed=42)
    g1 = synth.synth_generate(synth.SynthConfig(seed=42, n_users=500, home_rate=0.6))
    return model, g1


def test_c06_cascade_g1(criterion):
    model, g1 = _g1_cascade()
    preds = homeloc.predict_homes(g1.events, model)
    users = {e.user_id for e in g1.events}
    accepted = [p for p in preds if p.home is not None]
    close = [p for p in accepted
             if haversine_m(p.home, GeoPoint(g1.homes[p.user_id]["lat"], g1.homes[p.user_id]["lon"])) <= 100.0]
    rate = len(accepted) / len(users)
    acc = len(close) / len(accepted) if accepted else 0.0
    model2, _ = _g1_cascade()
    preds2 = homeloc.predict_homes(g1.events, model2)
    same = [p.to_json() for p in preds] == [p.to_json() for p in preds2]
    ok = rate >= 0.7 and acc >= 0.8 and same
    criterion(6, ok, f"accepted={rate:.1%} (>=70%); within 100 m={acc:.1%} (>=80%); deterministic={same}")
    assert ok


def test_c07_zone_classifier(criterion):
    corpus = synth.zone_corpus(7)
    train, test = corpus[:300], corpus[300:]
    model = coarsegeo.fit(train)
    pred = coarsegeo.predict_many([t for t, _ in test], model)
    acc = float(np.mean([z == pz for (_, z), (pz, _) in zip(test, pred)]))
    rng = random.Random(7)
    words = list(model.vocabulary) + ["", "zzz", "THE", "!!", "ñ", "a_b", "12"]
    worst = 0.0
    for _ in range(10_000):
        text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 15)))
        v = coarsegeo.featurize(text, model)
        if v:
            worst = max(worst, abs(np.sqrt(sum(x * x for x in v.values())) - 1.0))
    ok = acc >= 0.9 and worst <= 1e-12
    criterion(7, ok, f"held-out accuracy={acc:.1%} (>=90%); max |norm-1| over 10000 fuzz={worst:.1e}")
    assert ok


def test_c08_neighborhood_intersection(criterion):
    nb = world.miami_neighborhoods()
    v = visitor_shares(F.visitor_events(), nb)
    r = resident_shares(F.home_predictions(), nb)
    names = {n.id: n.name for n in nb}
    got = {names[i] for i in intersect_high_risk(v, r, 5).neighborhoods}
    want = {"Miami International Airport", "Wynwood", "Miami Beach"}
    criterion(8, got == want, f"high-risk set={sorted(got)}")
    assert got == want


def test_c09_flux_arithmetic(criterion):
    sets = [VisitSet("u1", frozenset({"PR", "A"})), VisitSet("u2", frozenset({"PR", "A", "B"}))]
    f = estimate_source_flux(sets, "PR", ["A", "B"], 1000.0)
    worked = f == {"A": 1000.0, "B": 500.0}
    linear = all(estimate_source_flux(sets, "PR", ["A", "B"], 1000.0 * k) == {z: v * k for z, v in f.items()}
                 for k in (0, 2, 3, 7, 1000))
    ok = worked and linear
    criterion(9, ok, f"worked example={f}; linear scaling exact={linear}")
    assert ok


def test_c10_pipeline_reproducible(criterion, tmp_path):
    cfg = str(ROOT / "fixtures" / "g1.json")
    t0 = time.perf_counter()
    assert main(["pipeline", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    elapsed = time.perf_counter() - t0
    assert main(["pipeline", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    same = files_a == files_b and all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files_a)
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    ok = same and elapsed <= 300.0
    criterion(10, ok, f"runtime={elapsed:.1f}s (<=300s); {len(files_a)} files byte-identical={same}; "
                      f"high-risk={summary['high_risk']}")
    assert ok
