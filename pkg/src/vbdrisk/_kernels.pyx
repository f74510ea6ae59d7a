# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: epidemic right-hand side, RK4 stepping, the
steady-state loop and eps-linkage clustering.

Layout: ``y[c, i]`` with c in (S_h, E_h, I_h, A_h, R_h, S_v, I_v).  Human
movement is given as edges (src -> dst) with per-capita daily rates.
``params`` is (b, beta_hv, beta_vh, delta, gamma, phi, mu).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sin, asin, sqrt

cnp.import_array()

DEF NC = 7
DEF NH = 5


cdef void _rhs(const double[:, ::1] y, double[:, ::1] out,
               const long[::1] src, const long[::1] dst, const double[::1] rate,
               const double[::1] nh, const double[::1] nv, const double[::1] p,
               long pinned) noexcept nogil:
    cdef Py_ssize_t z = y.shape[1]
    cdef Py_ssize_t i, e, c, j
    cdef double b = p[0], bhv = p[1], bvh = p[2], delta = p[3], gamma = p[4], phi = p[5], mu = p[6]
    cdef double sh, eh, ih, ah, sv, iv, inv, foi, vinf, m, r
    for i in range(z):
        sh = y[0, i]; eh = y[1, i]; ih = y[2, i]; ah = y[3, i]
        sv = y[5, i]; iv = y[6, i]
        inv = 1.0 / nh[i]
        foi = b * bvh * iv * sh * inv
        vinf = b * bhv * (ih + ah) * sv * inv
        out[0, i] = -foi
        out[1, i] = foi - delta * eh
        out[2, i] = delta * (1.0 - phi) * eh - gamma * ih
        out[3, i] = delta * phi * eh - gamma * ah
        out[4, i] = gamma * (ih + ah)
        out[5, i] = -vinf - mu * (sv - nv[i])
        out[6, i] = vinf - mu * iv
    for e in range(src.shape[0]):
        j = src[e]
        i = dst[e]
        r = rate[e]
        for c in range(NH):
            m = r * y[c, j]
            out[c, i] += m
            out[c, j] -= m
    if pinned >= 0:
        for c in range(NH):
            out[c, pinned] = 0.0


cdef double _residual(const double[:, ::1] y, const double[:, ::1] f) noexcept nogil:
    cdef Py_ssize_t c, i
    cdef double worst = 0.0, den, v
    for c in range(NC):
        for i in range(y.shape[1]):
            den = fabs(y[c, i])
            if den < 1.0:
                den = 1.0
            v = fabs(f[c, i]) / den
            if v > worst:
                worst = v
    return worst


cdef class _Work:
    cdef double[:, ::1] k1, k2, k3, k4, tmp, cand

    def __cinit__(self, Py_ssize_t z):
        self.k1 = np.zeros((NC, z))
        self.k2 = np.zeros((NC, z))
        self.k3 = np.zeros((NC, z))
        self.k4 = np.zeros((NC, z))
        self.tmp = np.zeros((NC, z))
        self.cand = np.zeros((NC, z))


cdef int _try_step(double[:, ::1] y, double h, bint have_k1, _Work w,
                   const long[::1] src, const long[::1] dst, const double[::1] rate,
                   const double[::1] nh, const double[::1] nv, const double[::1] p,
                   long pinned) noexcept nogil:
    """RK4 candidate into w.cand; returns 1 when some component undershoots -1e-9."""
    cdef Py_ssize_t z = y.shape[1]
    cdef Py_ssize_t c, i
    cdef double v
    if not have_k1:
        _rhs(y, w.k1, src, dst, rate, nh, nv, p, pinned)
    for c in range(NC):
        for i in range(z):
            w.tmp[c, i] = y[c, i] + 0.5 * h * w.k1[c, i]
    _rhs(w.tmp, w.k2, src, dst, rate, nh, nv, p, pinned)
    for c in range(NC):
        for i in range(z):
            w.tmp[c, i] = y[c, i] + 0.5 * h * w.k2[c, i]
    _rhs(w.tmp, w.k3, src, dst, rate, nh, nv, p, pinned)
    for c in range(NC):
        for i in range(z):
            w.tmp[c, i] = y[c, i] + h * w.k3[c, i]
    _rhs(w.tmp, w.k4, src, dst, rate, nh, nv, p, pinned)
    for c in range(NC):
        for i in range(z):
            v = y[c, i] + h / 6.0 * (w.k1[c, i] + 2.0 * w.k2[c, i] + 2.0 * w.k3[c, i] + w.k4[c, i])
            if v < -1e-9:
                return 1
            w.cand[c, i] = v if v > 0.0 else 0.0
    return 0


cdef int _advance(double[:, ::1] y, double dt, bint have_k1, _Work w, int max_halvings,
                  const long[::1] src, const long[::1] dst, const double[::1] rate,
                  const double[::1] nh, const double[::1] nv, const double[::1] p,
                  long pinned) noexcept nogil:
    """Advance y in place by dt, halving on rejection; returns 1 on stiffness."""
    cdef double remaining = dt, h = dt
    cdef int halvings = 0
    cdef Py_ssize_t c, i
    while remaining > 0.0:
        if h > remaining:
            h = remaining
        if _try_step(y, h, have_k1, w, src, dst, rate, nh, nv, p, pinned):
            halvings += 1
            if halvings > max_halvings:
                return 1
            h *= 0.5
            continue
        halvings = 0
        for c in range(NC):
            for i in range(y.shape[1]):
                y[c, i] = w.cand[c, i]
        remaining -= h
        have_k1 = False
        if remaining < 1e-12 * dt:
            break
    return 0


def rhs(y, const long[::1] src, const long[::1] dst, const double[::1] rate,
        const double[::1] nh, const double[::1] nv, const double[::1] params, long pinned=-1):
    cdef double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    out = np.empty_like(np.asarray(yv))
    _rhs(yv, out, src, dst, rate, nh, nv, params, pinned)
    return out


def advance(y, double dt, const long[::1] src, const long[::1] dst, const double[::1] rate,
            const double[::1] nh, const double[::1] nv, const double[::1] params,
            long pinned=-1, int max_halvings=40):
    """Return (new_y, stiff) after advancing by dt."""
    yc = np.array(y, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] yv = yc
    cdef _Work w = _Work(yc.shape[1])
    cdef int status
    with nogil:
        status = _advance(yv, dt, False, w, max_halvings, src, dst, rate, nh, nv, params, pinned)
    return yc, bool(status)


def integrate(y, double dt, double tol, double t_max, double hold,
              const long[::1] src, const long[::1] dst, const double[::1] rate,
              const double[::1] nh, const double[::1] nv, const double[::1] params,
              long pinned=-1, int max_halvings=40):
    """Step until the normalized derivative stays below tol for `hold` days.

    Returns (y, t, residual, t_reached, converged, stiff).  ``t_reached`` is the
    time the residual entered and then stayed below tol (-1 when never).
    """
    yc = np.array(y, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] yv = yc
    cdef _Work w = _Work(yc.shape[1])
    cdef double t = 0.0, res, below = -1.0
    cdef long n = 0
    cdef int stiff = 0
    cdef bint converged = False
    with nogil:
        _rhs(yv, w.k1, src, dst, rate, nh, nv, params, pinned)
        res = _residual(yv, w.k1)
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
            if _advance(yv, dt, True, w, max_halvings, src, dst, rate, nh, nv, params, pinned):
                stiff = 1
                break
            n += 1
            t = n * dt
            _rhs(yv, w.k1, src, dst, rate, nh, nv, params, pinned)
            res = _residual(yv, w.k1)
    return yc, t, res, (below if converged else -1.0), bool(converged), bool(stiff)


def linkage_labels(const double[::1] lat, const double[::1] lon, double eps_m):
    """Connected components of the eps-neighborhood graph (haversine metric).

    Labels are numbered in order of each component's smallest member index.
    """
    cdef Py_ssize_t n = lat.shape[0]
    cdef Py_ssize_t i, j, m, head, tail, k, n_free
    labels_arr = np.full(n, -1, dtype=np.int64)
    cdef long[::1] labels = labels_arr
    queue_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef long[::1] queue = queue_arr
    free_arr = np.arange(n, dtype=np.int64)
    cdef long[::1] free = free_arr
    rlat_arr = np.radians(np.asarray(lat))
    rlon_arr = np.radians(np.asarray(lon))
    cdef double[::1] rlat = rlat_arr
    cdef double[::1] rlon = rlon_arr
    cos_arr = np.cos(rlat_arr)
    cdef double[::1] clat = cos_arr
    cdef long cur = 0
    cdef double h, s1, s2
    # distance >= R*|dlat|, so a larger latitude gap can never link
    cdef double max_dlat = eps_m / 6371000.0 * (1.0 + 1e-9)
    n_free = n
    with nogil:
        for i in range(n):
            if labels[i] >= 0:
                continue
            labels[i] = cur
            head = 0
            tail = 0
            queue[tail] = i
            tail += 1
            while head < tail:
                k = queue[head]
                head += 1
                m = 0
                while m < n_free:
                    j = free[m]
                    if labels[j] >= 0:
                        # drop labeled points from the scan list
                        n_free -= 1
                        free[m] = free[n_free]
                        continue
                    if fabs(rlat[j] - rlat[k]) > max_dlat:
                        m += 1
                        continue
                    s1 = sin((rlat[j] - rlat[k]) * 0.5)
                    s2 = sin((rlon[j] - rlon[k]) * 0.5)
                    h = s1 * s1 + clat[k] * clat[j] * s2 * s2
                    if h > 1.0:
                        h = 1.0
                    if 2.0 * 6371000.0 * asin(sqrt(h)) <= eps_m:
                        labels[j] = cur
                        queue[tail] = j
                        tail += 1
                        n_free -= 1
                        free[m] = free[n_free]
                        continue
                    m += 1
            cur += 1
    return labels_arr
