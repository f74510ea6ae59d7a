"""Built-in schematic study area: Puerto Rico, the 67 Florida counties and a
grid of Miami neighborhoods.

Geometries are axis-aligned boxes laid out on a grid (Miami-Dade and Puerto
Rico sit at roughly their true coordinates); they exist so fixtures and the
synthetic generator have something to point-in-polygon against.  Populations
are rounded mid-2010s census estimates.
"""

from __future__ import annotations

from .geo import Neighborhood, Patch, Polygon

SOURCE_ID = "PR"
MIAMI_ID = "miami-dade"
DEFAULT_VECTOR_RATIO = 1.5

FL_COUNTIES = {
    "Alachua": 259_000, "Baker": 28_000, "Bay": 180_000, "Bradford": 27_000,
    "Brevard": 570_000, "Broward": 1_900_000, "Calhoun": 15_000, "Charlotte": 173_000,
    "Citrus": 143_000, "Clay": 205_000, "Collier": 357_000, "Columbia": 68_000,
    "DeSoto": 35_000, "Dixie": 16_000, "Duval": 913_000, "Escambia": 311_000,
    "Flagler": 105_000, "Franklin": 12_000, "Gadsden": 46_000, "Gilchrist": 17_000,
    "Glades": 13_000, "Gulf": 16_000, "Hamilton": 14_000, "Hardee": 27_000,
    "Hendry": 38_000, "Hernando": 179_000, "Highlands": 99_000, "Hillsborough": 1_350_000,
    "Holmes": 20_000, "Indian River": 147_000, "Jackson": 49_000, "Jefferson": 14_000,
    "Lafayette": 9_000, "Lake": 325_000, "Lee": 700_000, "Leon": 287_000,
    "Levy": 40_000, "Liberty": 8_000, "Madison": 19_000, "Manatee": 363_000,
    "Marion": 349_000, "Martin": 155_000, "Miami-Dade": 2_700_000, "Monroe": 78_000,
    "Nassau": 80_000, "Okaloosa": 198_000, "Okeechobee": 40_000, "Orange": 1_300_000,
    "Osceola": 323_000, "Palm Beach": 1_400_000, "Pasco": 498_000, "Pinellas": 950_000,
    "Polk": 650_000, "Putnam": 72_000, "St. Johns": 226_000, "St. Lucie": 298_000,
    "Santa Rosa": 170_000, "Sarasota": 405_000, "Seminole": 450_000, "Sumter": 118_000,
    "Suwannee": 44_000, "Taylor": 22_000, "Union": 15_000, "Volusia": 520_000,
    "Wakulla": 31_000, "Walton": 64_000, "Washington": 25_000,
}
PR_POPULATION = 3_400_000

# 2016 travel-associated case counts per county, used as flux proportions
TRAVEL_CASES = {
    "Miami-Dade": 350, "Broward": 182, "Orange": 176, "Hillsborough": 46, "Lee": 15,
    "Alachua": 12, "Duval": 11, "Sarasota": 5, "Volusia": 12, "Leon": 2,
}
TOTAL_CASES = {
    "Miami-Dade": 681, "Broward": 183, "Orange": 167, "Hillsborough": 46, "Lee": 15,
    "Alachua": 12, "Duval": 12, "Sarasota": 5, "Volusia": 2, "Leon": 2,
}

MIAMI_NEIGHBORHOODS = [
    "Miami International Airport", "Marlin Parks", "Wynwood", "InterContinental",
    "Miami Beach", "Downtown", "Allapattah", "Little Havana",
    "Coconut Grove", "Little River", "Brickell", "Hialeah",
    "Doral", "Coral Gables", "Kendall", "Overtown",
]

_MIAMI_BOX = (25.60, -80.45, 25.95, -80.10)
_NBHD_BOX = (25.70, -80.40, 25.90, -80.12)
_PR_BOX = (17.90, -67.30, 18.50, -65.60)


def slug(name: str) -> str:
    return name.lower().replace(". ", "-").replace(".", "").replace(" ", "-")


def florida_patches(vector_ratio: float = DEFAULT_VECTOR_RATIO) -> list[Patch]:
    """Source patch first, then the 67 counties in alphabetical order."""
    patches = [Patch(SOURCE_ID, "Puerto Rico", Polygon.box(*_PR_BOX),
                     PR_POPULATION, vector_ratio * PR_POPULATION)]
    others = [n for n in sorted(FL_COUNTIES) if n != "Miami-Dade"]
    ncol = 11
    for k, name in enumerate(sorted(FL_COUNTIES)):
        if name == "Miami-Dade":
            box = _MIAMI_BOX
        else:
            idx = others.index(name)
            r, c = divmod(idx, ncol)
            lat0 = 26.0 + 0.30 * r
            lon0 = -84.5 + 0.40 * c
            box = (lat0, lon0, lat0 + 0.30, lon0 + 0.40)
        pop = FL_COUNTIES[name]
        patches.append(Patch(slug(name), name, Polygon.box(*box), pop, vector_ratio * pop))
    return patches


def miami_neighborhoods() -> list[Neighborhood]:
    lat0, lon0, lat1, lon1 = _NBHD_BOX
    dlat = (lat1 - lat0) / 4
    dlon = (lon1 - lon0) / 4
    out = []
    for k, name in enumerate(MIAMI_NEIGHBORHOODS):
        r, c = divmod(k, 4)
        box = (lat0 + r * dlat, lon0 + c * dlon, lat0 + (r + 1) * dlat, lon0 + (c + 1) * dlon)
        out.append(Neighborhood(slug(name), name, Polygon.box(*box)))
    return out


def travel_flux_weights() -> dict[str, float]:
    """Patch id -> travel-case weight for the ten counties with reported imports."""
    return {slug(k): float(v) for k, v in TRAVEL_CASES.items()}
