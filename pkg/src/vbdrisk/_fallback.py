"""Pure-numpy versions of the routines in ``_kernels.pyx``.

Same signatures and semantics; used when the extension is not built or when
``VBDRISK_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import numpy as np

NC = 7
NH = 5


def _dense(src, dst, rate, z):
    alpha = np.zeros((z, z))
    np.add.at(alpha, (np.asarray(src), np.asarray(dst)), np.asarray(rate))
    return alpha


class _System:
    def __init__(self, src, dst, rate, nh, nv, params, pinned):
        self.nh = np.asarray(nh, float)
        self.nv = np.asarray(nv, float)
        self.alpha = _dense(src, dst, rate, len(self.nh))
        self.out_rate = self.alpha.sum(axis=1)
        self.p = [float(v) for v in params]
        self.pinned = int(pinned)

    def rhs(self, y):
        b, bhv, bvh, delta, gamma, phi, mu = self.p
        sh, eh, ih, ah, _, sv, iv = y
        out = np.empty_like(y)
        foi = b * bvh * iv * sh / self.nh
        vinf = b * bhv * (ih + ah) * sv / self.nh
        out[0] = -foi
        out[1] = foi - delta * eh
        out[2] = delta * (1.0 - phi) * eh - gamma * ih
        out[3] = delta * phi * eh - gamma * ah
        out[4] = gamma * (ih + ah)
        out[5] = -vinf - mu * (sv - self.nv)
        out[6] = vinf - mu * iv
        hum = y[:NH]
        out[:NH] += hum @ self.alpha - hum * self.out_rate
        if self.pinned >= 0:
            out[:NH, self.pinned] = 0.0
        return out

    def try_step(self, y, h, k1):
        if k1 is None:
            k1 = self.rhs(y)
        k2 = self.rhs(y + 0.5 * h * k1)
        k3 = self.rhs(y + 0.5 * h * k2)
        k4 = self.rhs(y + h * k3)
        cand = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if np.any(cand < -1e-9):
            return None
        return np.maximum(cand, 0.0)

    def advance(self, y, dt, k1, max_halvings):
        remaining = dt
        h = dt
        halvings = 0
        while remaining > 0.0:
            h = min(h, remaining)
            cand = self.try_step(y, h, k1)
            if cand is None:
                halvings += 1
                if halvings > max_halvings:
                    return y, True
                h *= 0.5
                continue
            halvings = 0
            y = cand
            k1 = None
            remaining -= h
            if remaining < 1e-12 * dt:
                break
        return y, False


def _residual(y, f):
    return float(np.max(np.abs(f) / np.maximum(np.abs(y), 1.0)))


def rhs(y, src, dst, rate, nh, nv, params, pinned=-1):
    return _System(src, dst, rate, nh, nv, params, pinned).rhs(np.asarray(y, float))


def advance(y, dt, src, dst, rate, nh, nv, params, pinned=-1, max_halvings=40):
    sys_ = _System(src, dst, rate, nh, nv, params, pinned)
    return sys_.advance(np.array(y, float), dt, None, max_halvings)


def integrate(y, dt, tol, t_max, hold, src, dst, rate, nh, nv, params, pinned=-1, max_halvings=40):
    sys_ = _System(src, dst, rate, nh, nv, params, pinned)
    y = np.array(y, float)
    t = 0.0
    n = 0
    below = -1.0
    converged = stiff = False
    f = sys_.rhs(y)
    res = _residual(y, f)
    while True:
        if res < tol:
            if below < 0.0:
                below = t
            if t - below >= hold - 1e-9:
                converged = True
                break
        else:
            below = -1.0
        if t >= t_max - 1e-9:
            break
        y, stiff = sys_.advance(y, dt, f, max_halvings)
        if stiff:
            break
        n += 1
        t = n * dt
        f = sys_.rhs(y)
        res = _residual(y, f)
    return y, t, res, (below if converged else -1.0), converged, stiff


def linkage_labels(lat, lon, eps_m):
    lat = np.radians(np.asarray(lat, float))
    lon = np.radians(np.asarray(lon, float))
    n = len(lat)
    labels = np.full(n, -1, dtype=np.int64)
    cos_lat = np.cos(lat)
    cur = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        labels[i] = cur
        queue = [i]
        while queue:
            k = queue.pop()
            free = np.nonzero(labels < 0)[0]
            if not len(free):
                break
            s1 = np.sin((lat[free] - lat[k]) * 0.5)
            s2 = np.sin((lon[free] - lon[k]) * 0.5)
            h = np.minimum(s1 * s1 + cos_lat[k] * cos_lat[free] * s2 * s2, 1.0)
            near = free[2.0 * 6371000.0 * np.arcsin(np.sqrt(h)) <= eps_m]
            labels[near] = cur
            queue.extend(near.tolist())
        cur += 1
    return labels


__all__ = ["rhs", "advance", "integrate", "linkage_labels"]
