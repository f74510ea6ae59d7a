"""Shared builders and an independent explicit-Euler oracle for model tests."""

import numpy as np

from vbdrisk import world
from vbdrisk.epimodel import EpiParams, EpiState, PatchGraph
from vbdrisk.flux import FluxMatrix
from vbdrisk.geo import Patch, Polygon

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*a, **k):
        return (lambda f: f) if not a or not callable(a[0]) else a[0]


def patches(n, pops=None, vector_ratio=1.5):
    pops = pops if pops is not None else [1000.0 * (k + 1) for k in range(n)]
    return [Patch(f"p{k}", f"P{k}", Polygon.box(k, 0, k + 0.5, 0.5), float(pops[k]),
                  vector_ratio * float(pops[k])) for k in range(n)]


def graph(ps, alpha=None):
    z = len(ps)
    alpha = np.zeros((z, z)) if alpha is None else np.asarray(alpha, float)
    return PatchGraph(ps, FluxMatrix([p.id for p in ps], alpha))


def random_alpha(rng, z, scale=0.01, density=1.0):
    a = rng.uniform(0, scale, (z, z)) * (rng.random((z, z)) < density)
    np.fill_diagonal(a, 0.0)
    return a


def balanced_alpha(rng, nh, scale=0.01, density=1.0):
    """Random flux with equal person-flows both ways on every edge."""
    z = len(nh)
    flow = rng.uniform(0, scale, (z, z)) * np.min(nh) * (rng.random((z, z)) < density)
    flow = np.triu(flow, 1)
    flow = flow + flow.T
    return flow / np.asarray(nh)[:, None]


def susceptible(g):
    y = np.zeros((7, len(g.patches)))
    y[0] = g.nh
    y[5] = g.nv
    return EpiState(y)


@njit(cache=True)
def _euler(y, alpha, nh, nv, b, bhv, bvh, delta, gamma, phi, mu, dt, steps):
    z = y.shape[1]
    y = y.copy()
    d = np.zeros_like(y)
    for _ in range(steps):
        for i in range(z):
            sh, eh, ih, ah, rh, sv, iv = y[0, i], y[1, i], y[2, i], y[3, i], y[4, i], y[5, i], y[6, i]
            new_h = b * bvh * iv * sh / nh[i]
            new_v = b * bhv * (ih + ah) * sv / nh[i]
            d[0, i] = -new_h
            d[1, i] = new_h - delta * eh
            d[2, i] = (1 - phi) * delta * eh - gamma * ih
            d[3, i] = phi * delta * eh - gamma * ah
            d[4, i] = gamma * (ih + ah)
            d[5, i] = mu * nv[i] - new_v - mu * sv
            d[6, i] = new_v - mu * iv
        for c in range(5):
            for i in range(z):
                inflow = 0.0
                outflow = 0.0
                for j in range(z):
                    inflow += alpha[j, i] * y[c, j]
                    outflow += alpha[i, j]
                d[c, i] += inflow - outflow * y[c, i]
        for c in range(7):
            for i in range(z):
                y[c, i] += dt * d[c, i]
    return y


def euler_oracle(state, g, params: EpiParams, t, dt=1e-4):
    p = params
    alpha = np.ascontiguousarray(g.alpha.alpha, dtype=float)
    return _euler(state.y, alpha, g.nh, g.nv, p.b, p.beta_hv, p.beta_vh, p.delta, p.gamma,
                  p.phi, p.mu, dt, int(round(t / dt)))


def table4_graph(air_volume=8000.0, return_factor=1.0):
    """The 68-patch study area with flux proportional to travel-case counts."""
    from vbdrisk.flux import to_rate_matrix
    ps = world.florida_patches()
    w = world.travel_flux_weights()
    total = sum(w.values())
    flux = {pid: air_volume * v / total for pid, v in w.items()}
    return ps, to_rate_matrix(flux, ps, world.SOURCE_ID, return_factor)
