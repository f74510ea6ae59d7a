"""Visitor events and home predictions engineered to the published share tables."""

from datetime import datetime, timedelta, timezone

from vbdrisk import world
from vbdrisk.geo import GeoPoint
from vbdrisk.homeloc import HomePrediction
from vbdrisk.ingest import ActivityEvent

T0 = datetime(2016, 1, 1, tzinfo=timezone.utc)

# neighborhood id -> located visitor events (of 1000)
VISITS = {"miami-international-airport": 169, "marlin-parks": 142, "wynwood": 140,
          "intercontinental": 135, "miami-beach": 100}
# neighborhood id -> accepted homes (of 20)
HOMES = {"downtown": 5, "miami-beach": 4, "wynwood": 2, "miami-international-airport": 2,
         "allapattah": 2, "little-havana": 1, "coconut-grove": 1, "little-river": 1,
         "brickell": 1, "hialeah": 1}
OUTSIDE = GeoPoint(25.65, -80.44)  # inside Miami-Dade, outside every neighborhood


def centers():
    return {n.id: n.geometry.centroid() for n in world.miami_neighborhoods()}


def visitor_events():
    c = centers()
    counts = dict(VISITS)
    for nid in sorted(c):
        counts.setdefault(nid, 25)
    out = []
    k = 0
    for nid in sorted(counts):
        for _ in range(counts[nid]):
            out.append(ActivityEvent(f"v{k % 37:02d}", T0 + timedelta(minutes=k), c[nid]))
            k += 1
    for _ in range(1000 - k):
        out.append(ActivityEvent(f"v{k % 37:02d}", T0 + timedelta(minutes=k), OUTSIDE))
        k += 1
    return out


def home_predictions(unknown=0):
    c = centers()
    out = []
    for nid in sorted(HOMES):
        for j in range(HOMES[nid]):
            out.append(HomePrediction(f"r-{nid}-{j}", c[nid], 0.9))
    for j in range(unknown):
        out.append(HomePrediction(f"r-unknown-{j}", None, 0.2))
    return out
