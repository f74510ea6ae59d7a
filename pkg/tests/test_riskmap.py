import json
import os
import random
from pathlib import Path

import pytest

import riskmap_fixtures as F
from vbdrisk import world
from vbdrisk.errors import EmptySampleError, VbdError
from vbdrisk.geo import GeoPoint
from vbdrisk.homeloc import HomePrediction
from vbdrisk.riskmap import (RiskSet, ShareTable, emit_report, intersect_high_risk,
                             read_county_risk, resident_shares, union_high_risk, visitor_shares)

NB = world.miami_neighborhoods()
GOLDEN = Path(__file__).parent / "golden"


def test_table_iv_rows():
    t = visitor_shares(F.visitor_events(), NB)
    top = [(nid, round(p, 1)) for nid, p in t.rows()[:5]]
    assert top == [("miami-international-airport", 16.9), ("marlin-parks", 14.2), ("wynwood", 14.0),
                   ("intercontinental", 13.5), ("miami-beach", 10.0)]
    assert t.denominator == 1000 and t.other == 39


def test_table_v_rows():
    t = resident_shares(F.home_predictions(), NB)
    assert [(n, p) for n, p in t.rows()[:5]] == [
        ("downtown", 25.0), ("miami-beach", 20.0), ("allapattah", 10.0),
        ("miami-international-airport", 10.0), ("wynwood", 10.0)]


def test_intersection_matches_published_result():
    v = visitor_shares(F.visitor_events(), NB)
    r = resident_shares(F.home_predictions(), NB)
    rs = intersect_high_risk(v, r, top_k=5)
    names = {n.id: n.name for n in NB}
    assert {names[i] for i in rs.neighborhoods} == {"Miami International Airport", "Wynwood", "Miami Beach"}
    assert rs.neighborhoods <= union_high_risk(v, r, 5).neighborhoods


def test_single_neighborhood_and_single_home():
    c = F.centers()
    evs = [F.ActivityEvent("u", F.T0, c["wynwood"])] * 3
    assert visitor_shares(evs, NB).rows() == [("wynwood", 100.0)]
    assert resident_shares([HomePrediction("u", c["doral"], 1.0)], NB).rows() == [("doral", 100.0)]


def test_unknowns_change_nothing():
    a = resident_shares(F.home_predictions(), NB)
    b = resident_shares(F.home_predictions(unknown=7), NB)
    assert a == b


def test_permutation_invariance():
    evs = F.visitor_events()
    base = visitor_shares(evs, NB)
    random.Random(0).shuffle(evs)
    assert visitor_shares(evs, NB) == base
    assert visitor_shares(evs, NB, per_user=True) == visitor_shares(evs[::-1], NB, per_user=True)


def test_empty_inputs():
    with pytest.raises(EmptySampleError):
        visitor_shares([], NB)
    with pytest.raises(EmptySampleError):
        resident_shares([HomePrediction("u", None, 0.1)], NB)


def test_top_k_ties_and_disjoint():
    t = ShareTable("x", {"a": 3, "b": 2, "c": 2, "d": 1}, 8)
    assert t.top(2) == {"a", "b", "c"}
    u = ShareTable("y", {"e": 3, "f": 1}, 4)
    assert intersect_high_risk(t, u, 2).neighborhoods == frozenset()
    assert intersect_high_risk(t, t, 1).neighborhoods == {"a"}


def test_shares_sum_to_100():
    for t in (visitor_shares(F.visitor_events(), NB), resident_shares(F.home_predictions(), NB)):
        assert abs(sum(float(f"{p:.1f}") for _, p in t.rows()) + float(f"{t.other_pct():.1f}") - 100) <= 0.1


def _report(out):
    v = visitor_shares(F.visitor_events(), NB)
    r = resident_shares(F.home_predictions(), NB)
    patches = world.florida_patches()[:3]
    ranked = [(patches[1].id, 12.5), (patches[2].id, 3.25)]
    ih = {patches[1].id: 45.625, patches[2].id: 11.8625, patches[0].id: 0.0}
    return emit_report(out, [v, r], intersect_high_risk(v, r, 5), NB, ranked, ih, patches)


def test_golden_report(tmp_path):
    written = _report(tmp_path)
    if os.environ.get("VBDRISK_REGEN_GOLDEN"):
        GOLDEN.mkdir(exist_ok=True)
        for name, p in written.items():
            (GOLDEN / name).write_bytes(p.read_bytes())
    for name, p in written.items():
        assert p.read_bytes() == (GOLDEN / name).read_bytes(), name


def test_report_roundtrip_and_empty_set(tmp_path):
    _report(tmp_path)
    ranked, ih = read_county_risk(tmp_path / "county_risk.csv")
    assert ranked[0][1] == 12.5 and ih[ranked[1][0]] == 11.8625
    gj = json.loads((tmp_path / "county_risk.geojson").read_text())
    risk = {f["properties"]["id"]: f["properties"]["risk"] for f in gj["features"]}
    assert risk[ranked[0][0]] == 12.5
    t = ShareTable("x", {"a": 1}, 1)
    emit_report(tmp_path / "e", [t], RiskSet(frozenset()))
    assert json.loads((tmp_path / "e" / "risk_set.json").read_text())["neighborhoods"] == []


def test_unwritable_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises((OSError, VbdError)):
        emit_report(blocker / "sub", [ShareTable("x", {"a": 1}, 1)], RiskSet(frozenset()))
