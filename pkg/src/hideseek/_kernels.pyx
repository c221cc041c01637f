# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled geometry kernels. Semantics are defined by ``_pykernels``."""

from libc.math cimport sqrt, fabs, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef int GHOST = 0
cdef int STATIC = 3


cdef inline void _slab(double o, double d, double lo, double hi,
                       double* t0, double* t1) noexcept nogil:
    cdef double a, b
    if d == 0.0:
        if lo <= o and o <= hi:
            t0[0] = -INFINITY
            t1[0] = INFINITY
        else:
            t0[0] = INFINITY
            t1[0] = -INFINITY
        return
    a = (lo - o) / d
    b = (hi - o) / d
    if a < b:
        t0[0] = a
        t1[0] = b
    else:
        t0[0] = b
        t1[0] = a


cdef inline bint _quad(double a, double b, double c, double* q0, double* q1) noexcept nogil:
    cdef double disc, s
    if a == 0.0:
        if c <= 0.0:
            q0[0] = -INFINITY
            q1[0] = INFINITY
            return True
        return False
    disc = b * b - a * c
    if disc < 0.0:
        return False
    s = sqrt(disc)
    q0[0] = (-b - s) / a
    q1[0] = (-b + s) / a
    return True


def ray_boxes(origin, dirs, lo, hi, double t_min, double t_max):
    cdef double[::1] o = np.ascontiguousarray(origin, dtype=np.float64)
    cdef double[:, ::1] D = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef double[:, ::1] L = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:, ::1] H = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n_rays = D.shape[0]
    cdef Py_ssize_t n_boxes = L.shape[0]
    out_t_arr = np.full(n_rays, np.inf)
    out_i_arr = np.full(n_rays, -1, dtype=np.int64)
    cdef double[::1] out_t = out_t_arr
    cdef long long[::1] out_i = out_i_arr
    cdef Py_ssize_t r, b, k
    cdef double enter, exit_, t0, t1, best
    cdef long long best_b
    with nogil:
        for r in range(n_rays):
            best = INFINITY
            best_b = -1
            for b in range(n_boxes):
                enter = -INFINITY
                exit_ = INFINITY
                for k in range(3):
                    _slab(o[k], D[r, k], L[b, k], H[b, k], &t0, &t1)
                    if t0 > enter:
                        enter = t0
                    if t1 < exit_:
                        exit_ = t1
                if enter <= exit_ and enter >= t_min and enter <= t_max:
                    if enter < best:
                        best = enter
                        best_b = b
            if best_b >= 0:
                out_t[r] = best
                out_i[r] = best_b
    return out_t_arr, out_i_arr


def segment_first_hit(p0, p1, lo, hi):
    cdef double[::1] a = np.ascontiguousarray(p0, dtype=np.float64)
    cdef double[::1] e = np.ascontiguousarray(p1, dtype=np.float64)
    cdef double[:, ::1] L = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:, ::1] H = np.ascontiguousarray(hi, dtype=np.float64)
    cdef double d[3]
    cdef Py_ssize_t b, k
    cdef double enter, exit_, t0, t1
    for k in range(3):
        d[k] = e[k] - a[k]
    for b in range(L.shape[0]):
        enter = 0.0
        exit_ = 1.0
        for k in range(3):
            _slab(a[k], d[k], L[b, k], H[b, k], &t0, &t1)
            if t0 > enter:
                enter = t0
            if t1 < exit_:
                exit_ = t1
        if enter <= exit_:
            return b
    return -1


cdef double _sweep_one(double* o, double* d, double r, double* lo, double* hi) noexcept nogil:
    cdef double best = INFINITY
    cdef double enter, exit_, t0, t1, s0, s1, q0, q1, fu, fv, f0, f1, f2
    cdef double cu, cv, cx, cy, cz
    cdef int a, k, u, v, iu, iv, ix, iy, iz
    for a in range(3):
        enter = 0.0
        exit_ = INFINITY
        for k in range(3):
            if k == a:
                _slab(o[k], d[k], lo[k] - r, hi[k] + r, &t0, &t1)
            else:
                _slab(o[k], d[k], lo[k], hi[k], &t0, &t1)
            if t0 > enter:
                enter = t0
            if t1 < exit_:
                exit_ = t1
        if enter <= exit_ and enter < best:
            best = enter
    for a in range(3):
        u = (a + 1) % 3
        v = (a + 2) % 3
        _slab(o[a], d[a], lo[a], hi[a], &s0, &s1)
        for iu in range(2):
            cu = lo[u] if iu == 0 else hi[u]
            for iv in range(2):
                cv = lo[v] if iv == 0 else hi[v]
                fu = o[u] - cu
                fv = o[v] - cv
                if not _quad(d[u] * d[u] + d[v] * d[v], fu * d[u] + fv * d[v],
                             fu * fu + fv * fv - r * r, &q0, &q1):
                    continue
                enter = q0
                if s0 > enter:
                    enter = s0
                if enter < 0.0:
                    enter = 0.0
                exit_ = q1
                if s1 < exit_:
                    exit_ = s1
                if enter <= exit_ and enter < best:
                    best = enter
    for ix in range(2):
        cx = lo[0] if ix == 0 else hi[0]
        for iy in range(2):
            cy = lo[1] if iy == 0 else hi[1]
            for iz in range(2):
                cz = lo[2] if iz == 0 else hi[2]
                f0 = o[0] - cx
                f1 = o[1] - cy
                f2 = o[2] - cz
                if not _quad(d[0] * d[0] + d[1] * d[1] + d[2] * d[2],
                             f0 * d[0] + f1 * d[1] + f2 * d[2],
                             f0 * f0 + f1 * f1 + f2 * f2 - r * r, &q0, &q1):
                    continue
                enter = q0
                if enter < 0.0:
                    enter = 0.0
                if enter <= q1 and enter < best:
                    best = enter
    return best


def sphere_sweep(origin, dirs, double radius, double length, lo, hi):
    cdef double[::1] og = np.ascontiguousarray(origin, dtype=np.float64)
    cdef double[:, ::1] D = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef double[:, ::1] L = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[:, ::1] H = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t n_rays = D.shape[0]
    cdef Py_ssize_t n_boxes = L.shape[0]
    out_t_arr = np.full(n_rays, np.inf)
    out_i_arr = np.full(n_rays, -1, dtype=np.int64)
    cdef double[::1] out_t = out_t_arr
    cdef long long[::1] out_i = out_i_arr
    cdef double o[3]
    cdef double d[3]
    cdef double blo[3]
    cdef double bhi[3]
    cdef double r = radius
    cdef double best, enter, exit_, t0, t1, t
    cdef long long best_b
    cdef Py_ssize_t i, b, k
    for k in range(3):
        o[k] = og[k]
    with nogil:
        for i in range(n_rays):
            for k in range(3):
                d[k] = D[i, k]
            best = INFINITY
            best_b = -1
            for b in range(n_boxes):
                enter = 0.0
                exit_ = INFINITY
                for k in range(3):
                    blo[k] = L[b, k]
                    bhi[k] = H[b, k]
                    _slab(o[k], d[k], blo[k] - r, bhi[k] + r, &t0, &t1)
                    if t0 > enter:
                        enter = t0
                    if t1 < exit_:
                        exit_ = t1
                if enter > exit_ or enter > length or enter >= best:
                    continue
                t = _sweep_one(o, d, r, blo, bhi)
                if t <= length and t < best:
                    best = t
                    best_b = b
            if best_b >= 0:
                out_t[i] = best
                out_i[i] = best_b
    return out_t_arr, out_i_arr


def resolve_overlaps(double[:, ::1] pos, double[:, ::1] vel, half, prio, is_agent,
                     bounds_lo, bounds_hi, int iterations):
    cdef double[:, ::1] H = np.ascontiguousarray(half, dtype=np.float64)
    cdef long long[::1] pr = np.ascontiguousarray(prio, dtype=np.int64)
    cdef unsigned char[::1] ag = np.ascontiguousarray(is_agent, dtype=np.uint8)
    cdef double[::1] blo = np.ascontiguousarray(bounds_lo, dtype=np.float64)
    cdef double[::1] bhi = np.ascontiguousarray(bounds_hi, dtype=np.float64)
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j, k
    cdef int ax, it, passes = 0
    cdef bint moved
    cdef double pen, pen0, pen1, pen2, s, m, lo_k, hi_k
    with nogil:
        for it in range(iterations):
            passes += 1
            moved = False
            for i in range(n):
                if pr[i] == GHOST:
                    continue
                for j in range(i + 1, n):
                    if pr[j] == GHOST:
                        continue
                    if pr[i] == STATIC and pr[j] == STATIC:
                        continue
                    if ag[i] and ag[j]:
                        continue
                    pen0 = (H[i, 0] + H[j, 0]) - fabs(pos[j, 0] - pos[i, 0])
                    if pen0 <= 0.0:
                        continue
                    pen1 = (H[i, 1] + H[j, 1]) - fabs(pos[j, 1] - pos[i, 1])
                    if pen1 <= 0.0:
                        continue
                    pen2 = (H[i, 2] + H[j, 2]) - fabs(pos[j, 2] - pos[i, 2])
                    if pen2 <= 0.0:
                        continue
                    ax = 0
                    pen = pen0
                    if pen1 < pen:
                        ax = 1
                        pen = pen1
                    if pen2 < pen:
                        ax = 2
                        pen = pen2
                    s = 1.0 if pos[j, ax] >= pos[i, ax] else -1.0
                    if pr[i] > pr[j]:
                        pos[j, ax] = pos[j, ax] + s * pen
                        if pr[i] == STATIC:
                            if s * vel[j, ax] < 0.0:
                                vel[j, ax] = 0.0
                        elif s * vel[i, ax] > s * vel[j, ax]:
                            vel[j, ax] = vel[i, ax]
                    elif pr[j] > pr[i]:
                        pos[i, ax] = pos[i, ax] - s * pen
                        if pr[j] == STATIC:
                            if s * vel[i, ax] > 0.0:
                                vel[i, ax] = 0.0
                        elif s * vel[j, ax] < s * vel[i, ax]:
                            vel[i, ax] = vel[j, ax]
                    else:
                        pos[i, ax] = pos[i, ax] - s * (0.5 * pen)
                        pos[j, ax] = pos[j, ax] + s * (0.5 * pen)
                        if s * (vel[j, ax] - vel[i, ax]) < 0.0:
                            m = 0.5 * (vel[i, ax] + vel[j, ax])
                            vel[i, ax] = m
                            vel[j, ax] = m
                    moved = True
            if not moved:
                break
        for i in range(n):
            if pr[i] == STATIC:
                continue
            for k in range(3):
                lo_k = blo[k] + H[i, k]
                hi_k = bhi[k] - H[i, k]
                if pos[i, k] < lo_k:
                    pos[i, k] = lo_k
                    if vel[i, k] < 0.0:
                        vel[i, k] = 0.0
                elif pos[i, k] > hi_k:
                    pos[i, k] = hi_k
                    if vel[i, k] > 0.0:
                        vel[i, k] = 0.0
    return passes
