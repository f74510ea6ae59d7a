import numpy as np
import pytest

from conftest import ev
from vbdrisk.coarsegeo import fit
from vbdrisk.errors import EmptySampleError, ValidationError
from vbdrisk.flux import FluxMatrix, VisitSet, build_visit_sets, estimate_source_flux, to_rate_matrix
from vbdrisk.geo import Patch, Polygon

PATCHES = [Patch("PR", "Puerto Rico", Polygon.box(18, -67, 19, -66), 1e6, 1.5e6),
           Patch("A", "A", Polygon.box(25, -81, 26, -80), 2e5, 3e5),
           Patch("B", "B", Polygon.box(27, -81, 28, -80), 1e5, 1.5e5)]


def vs(uid, *zones):
    return VisitSet(uid, frozenset(zones))


def test_worked_example():
    f = estimate_source_flux([vs("u1", "PR", "A"), vs("u2", "PR", "A", "B")], "PR", ["A", "B"], 1000.0)
    assert f == {"A": 1000.0, "B": 500.0}


def test_single_county():
    f = estimate_source_flux([vs("u1", "PR", "A"), vs("u2", "PR", "A")], "PR", ["A", "B"], 700.0)
    assert f == {"A": 700.0, "B": 0.0}


def test_zero_volume_and_scaling():
    sets = [vs("u1", "PR", "A"), vs("u2", "PR", "A", "B"), vs("u3", "PR", "B"), vs("u4", "A")]
    assert set(estimate_source_flux(sets, "PR", ["A", "B"], 0.0).values()) == {0.0}
    base = estimate_source_flux(sets, "PR", ["A", "B"], 1000.0)
    for k in (2, 3, 10):
        scaled = estimate_source_flux(sets, "PR", ["A", "B"], 1000.0 * k)
        assert scaled == {z: v * k for z, v in base.items()}


def test_empty_sample():
    with pytest.raises(EmptySampleError):
        estimate_source_flux([vs("u1", "A", "B")], "PR", ["A", "B"], 1000.0)


def test_visit_sets_geo():
    events = [ev("u", 18.5, -66.5), ev("u", 25.5, -80.5, hours=1), ev("w", 40, -100)]
    assert build_visit_sets(events, PATCHES) == [vs("u", "PR", "A")]


def test_visit_sets_text_confidence():
    model = fit([("isla boricua", "PR"), ("boricua mofongo", "PR"), ("gator swamp", "A"), ("swamp", "A")])
    events = [ev("t", text="boricua")]
    got = build_visit_sets(events, PATCHES, 0.5, model)
    assert got == [vs("t", "PR")]
    assert build_visit_sets(events, PATCHES, 0.9999, model) == []
    assert build_visit_sets(events, PATCHES) == []  # no model, text ignored


def test_rate_matrix():
    fm = to_rate_matrix({"A": 100.0, "B": 50.0}, PATCHES, "PR")
    assert fm.alpha[0, 1] == pytest.approx(1e-4)
    assert fm.alpha[1, 0] == pytest.approx(100.0 / 2e5)
    assert fm.alpha[0, 2] == pytest.approx(5e-5)
    assert np.all(np.diag(fm.alpha) == 0)
    zero = to_rate_matrix({"A": 100.0}, PATCHES, "PR", return_factor=0.0)
    assert np.all(zero.alpha[:, 0] == 0)
    with pytest.raises(ValidationError):
        to_rate_matrix({"C": 1.0}, PATCHES, "PR")


def test_flux_matrix_validation(tmp_path):
    with pytest.raises(ValidationError):
        FluxMatrix(["a", "b"], np.array([[0, -1.0], [0, 0]]))
    with pytest.raises(ValidationError):
        FluxMatrix(["a", "b"], np.array([[1.0, 0], [0, 0]]))
    fm = to_rate_matrix({"A": 100.0, "B": 50.0}, PATCHES, "PR", 0.5)
    fm.to_csv(tmp_path / "f.csv")
    back = FluxMatrix.from_csv(tmp_path / "f.csv", [p.id for p in PATCHES])
    assert np.array_equal(back.alpha, fm.alpha)
