from datetime import datetime, timedelta, timezone

import pytest

from vbdrisk.geo import GeoPoint
from vbdrisk.ingest import ActivityEvent

T0 = datetime(2016, 3, 7, 12, 0, tzinfo=timezone.utc)  # a Monday


def ev(uid, lat=None, lon=None, hours=0.0, text=None):
    geo = None if lat is None else GeoPoint(lat, lon)
    return ActivityEvent(uid, T0 + timedelta(hours=hours), geo, text)


@pytest.fixture
def make_event():
    return ev


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test body calls it with (number, passed, detail)."""
    def record(n, passed, detail):
        ACCEPTANCE[n] = (bool(passed), detail)
        print(f"ACCEPTANCE {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
