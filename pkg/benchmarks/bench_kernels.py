"""Compiled kernels vs. the pure numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the model right-hand side, a fixed-length integration on the 68-patch
study area and 100 m linkage clustering, and checks both backends agree.
"""

import argparse
import time

import numpy as np

from vbdrisk import _backend, _fallback, world
from vbdrisk.epimodel import EpiParams, PatchGraph, initial_state
from vbdrisk.flux import to_rate_matrix


def _best(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def study_area():
    ps = world.florida_patches()
    w = world.travel_flux_weights()
    total = sum(w.values())
    rates = to_rate_matrix({k: 8000.0 * v / total for k, v in w.items()}, ps, world.SOURCE_ID)
    g = PatchGraph(ps, rates)
    p = EpiParams()
    y = initial_state(g, world.SOURCE_ID, 1e-3, p).y
    return g, p, y


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--days", type=float, default=500.0)
    args = ap.parse_args()
    if _backend.NAME != "cython":
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    fast, slow = _backend.kernels, _fallback

    g, p, y = study_area()
    kargs = g.kernel_args(p)
    s = g.index(world.SOURCE_ID)
    rng = np.random.default_rng(0)
    lat = 25.7 + rng.uniform(0, 0.01, 2000)
    lon = -80.3 + rng.uniform(0, 0.01, 2000)

    cases = [
        ("rhs x1000 (68 patches)",
         lambda: [fast.rhs(y, *kargs, s) for _ in range(1000)][-1],
         lambda: [slow.rhs(y, *kargs, s) for _ in range(1000)][-1]),
        (f"integrate {args.days:g} days",
         lambda: fast.integrate(y, 0.1, 1e-30, args.days, 10.0, *kargs, s, 40)[0],
         lambda: slow.integrate(y, 0.1, 1e-30, args.days, 10.0, *kargs, s, 40)[0]),
        ("linkage 2000 points",
         lambda: fast.linkage_labels(lat, lon, 100.0),
         lambda: slow.linkage_labels(lat, lon, 100.0)),
    ]
    print(f"{'case':28s} {'cython':>10s} {'python':>10s} {'speedup':>8s}  agree")
    for name, f_fast, f_slow in cases:
        tf, a = _best(f_fast, args.repeat)
        ts, b = _best(f_slow, args.repeat)
        agree = np.allclose(np.asarray(a), np.asarray(b), rtol=1e-9, atol=1e-9)
        print(f"{name:28s} {tf * 1e3:9.1f}ms {ts * 1e3:9.1f}ms {ts / tf:7.1f}x  {agree}")


if __name__ == "__main__":
    main()
