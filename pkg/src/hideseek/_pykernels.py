"""Pure-Python / numpy implementations of the hot geometry kernels.

These mirror ``_kernels.pyx`` operation for operation so that both backends
produce the same floating point results. They are used when the compiled
extension is unavailable or when ``HIDESEEK_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np

GHOST, LIGHT, AGENT, STATIC = 0, 1, 2, 3

_INF = math.inf


def _slab(o, d, lo, hi):
    """Parametric interval of a ray inside the slab [lo, hi] on one axis."""
    if d == 0.0:
        if lo <= o <= hi:
            return -_INF, _INF
        return _INF, -_INF
    t1 = (lo - o) / d
    t2 = (hi - o) / d
    if t1 < t2:
        return t1, t2
    return t2, t1


def ray_boxes(origin, dirs, lo, hi, t_min, t_max):
    """Nearest box entry distance along each ray.

    Returns ``(t, idx)``: for every ray the smallest entry parameter in
    ``[t_min, t_max]`` over all boxes and the index of that box, or
    ``(inf, -1)`` when nothing is hit. Boxes are closed.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    n_rays = dirs.shape[0]
    n_boxes = lo.shape[0]
    out_t = np.full(n_rays, np.inf)
    out_i = np.full(n_rays, -1, dtype=np.int64)
    if n_boxes == 0 or n_rays == 0:
        return out_t, out_i
    o = np.asarray(origin, dtype=np.float64)
    enter = np.full((n_rays, n_boxes), -np.inf)
    exit_ = np.full((n_rays, n_boxes), np.inf)
    for k in range(3):
        d = dirs[:, k][:, None]
        zero = d == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[None, :, k] - o[k]) / d
            t2 = (hi[None, :, k] - o[k]) / d
        near = np.where(t1 < t2, t1, t2)
        far = np.where(t1 < t2, t2, t1)
        inside = (lo[None, :, k] <= o[k]) & (o[k] <= hi[None, :, k])
        near = np.where(zero, np.where(inside, -np.inf, np.inf), near)
        far = np.where(zero, np.where(inside, np.inf, -np.inf), far)
        enter = np.where(near > enter, near, enter)
        exit_ = np.where(far < exit_, far, exit_)
    ok = (enter <= exit_) & (enter >= t_min) & (enter <= t_max)
    cand = np.where(ok, enter, np.inf)
    idx = np.argmin(cand, axis=1)
    best = cand[np.arange(n_rays), idx]
    hit = np.isfinite(best)
    out_t[hit] = best[hit]
    out_i[hit] = idx[hit]
    return out_t, out_i


def segment_first_hit(p0, p1, lo, hi):
    """Index of the first box (lowest index) touched by segment p0-p1, or -1."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    o0, o1, o2 = float(p0[0]), float(p0[1]), float(p0[2])
    d0 = float(p1[0]) - o0
    d1 = float(p1[1]) - o1
    d2 = float(p1[2]) - o2
    for b in range(lo.shape[0]):
        a0, b0 = _slab(o0, d0, lo[b, 0], hi[b, 0])
        a1, b1 = _slab(o1, d1, lo[b, 1], hi[b, 1])
        a2, b2 = _slab(o2, d2, lo[b, 2], hi[b, 2])
        enter = max(a0, a1, a2, 0.0)
        exit_ = min(b0, b1, b2, 1.0)
        if enter <= exit_:
            return b
    return -1


def _quad_interval(a, b, c):
    """Interval where a*t^2 + 2*b*t + c <= 0 (a >= 0), or None."""
    if a == 0.0:
        if c <= 0.0:
            return -_INF, _INF
        return None
    disc = b * b - a * c
    if disc < 0.0:
        return None
    s = math.sqrt(disc)
    return (-b - s) / a, (-b + s) / a


def _sweep_one(o, d, r, lo, hi):
    """Earliest t >= 0 at which a sphere of radius r moving along o + t*d
    touches the closed box [lo, hi]; inf if never."""
    best = _INF
    # face slabs: box grown by r along a single axis
    for a in range(3):
        enter = 0.0
        exit_ = _INF
        for k in range(3):
            if k == a:
                t0, t1 = _slab(o[k], d[k], lo[k] - r, hi[k] + r)
            else:
                t0, t1 = _slab(o[k], d[k], lo[k], hi[k])
            if t0 > enter:
                enter = t0
            if t1 < exit_:
                exit_ = t1
        if enter <= exit_ and enter < best:
            best = enter
    # edge cylinders
    for a in range(3):
        u = (a + 1) % 3
        v = (a + 2) % 3
        s0, s1 = _slab(o[a], d[a], lo[a], hi[a])
        for cu in (lo[u], hi[u]):
            for cv in (lo[v], hi[v]):
                fu = o[u] - cu
                fv = o[v] - cv
                q = _quad_interval(
                    d[u] * d[u] + d[v] * d[v],
                    fu * d[u] + fv * d[v],
                    fu * fu + fv * fv - r * r,
                )
                if q is None:
                    continue
                enter = q[0]
                if s0 > enter:
                    enter = s0
                if enter < 0.0:
                    enter = 0.0
                exit_ = q[1]
                if s1 < exit_:
                    exit_ = s1
                if enter <= exit_ and enter < best:
                    best = enter
    # corner spheres
    for cx in (lo[0], hi[0]):
        for cy in (lo[1], hi[1]):
            for cz in (lo[2], hi[2]):
                f0 = o[0] - cx
                f1 = o[1] - cy
                f2 = o[2] - cz
                q = _quad_interval(
                    d[0] * d[0] + d[1] * d[1] + d[2] * d[2],
                    f0 * d[0] + f1 * d[1] + f2 * d[2],
                    f0 * f0 + f1 * f1 + f2 * f2 - r * r,
                )
                if q is None:
                    continue
                enter = q[0]
                if enter < 0.0:
                    enter = 0.0
                if enter <= q[1] and enter < best:
                    best = enter
    return best


def sphere_sweep(origin, dirs, radius, length, lo, hi):
    """Sphere cast of each ray against every box.

    Returns ``(t, idx)`` with the centre travel distance at first contact,
    limited to ``[0, length]``; misses are ``(inf, -1)``.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    o = [float(x) for x in origin]
    r = float(radius)
    lo_l = lo.tolist()
    hi_l = hi.tolist()
    n_rays = dirs.shape[0]
    out_t = np.full(n_rays, np.inf)
    out_i = np.full(n_rays, -1, dtype=np.int64)
    for i, d in enumerate(dirs.tolist()):
        best = _INF
        best_b = -1
        for b in range(len(lo_l)):
            blo = lo_l[b]
            bhi = hi_l[b]
            # broad phase against the fully grown box
            enter = 0.0
            exit_ = _INF
            for k in range(3):
                t0, t1 = _slab(o[k], d[k], blo[k] - r, bhi[k] + r)
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
    return out_t, out_i


def resolve_overlaps(pos, vel, half, prio, is_agent, bounds_lo, bounds_hi, iterations):
    """Minimal-translation pushout, in place. Returns the number of passes run.

    Pairs are visited in index order. Higher priority bodies push lower ones;
    equal priorities split the correction. Static and ghost bodies never move,
    and agent/agent pairs are skipped.
    """
    n = pos.shape[0]
    P = pos.tolist()
    V = vel.tolist()
    H = half.tolist()
    pr = [int(x) for x in prio]
    ag = [bool(x) for x in is_agent]
    passes = 0
    for _ in range(iterations):
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
                pi = P[i]
                pj = P[j]
                hi_ = H[i]
                hj = H[j]
                pen0 = (hi_[0] + hj[0]) - abs(pj[0] - pi[0])
                if pen0 <= 0.0:
                    continue
                pen1 = (hi_[1] + hj[1]) - abs(pj[1] - pi[1])
                if pen1 <= 0.0:
                    continue
                pen2 = (hi_[2] + hj[2]) - abs(pj[2] - pi[2])
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
                s = 1.0 if pj[ax] >= pi[ax] else -1.0
                vi = V[i]
                vj = V[j]
                if pr[i] > pr[j]:
                    pj[ax] = pj[ax] + s * pen
                    if pr[i] == STATIC:
                        if s * vj[ax] < 0.0:
                            vj[ax] = 0.0
                    elif s * vi[ax] > s * vj[ax]:
                        vj[ax] = vi[ax]
                elif pr[j] > pr[i]:
                    pi[ax] = pi[ax] - s * pen
                    if pr[j] == STATIC:
                        if s * vi[ax] > 0.0:
                            vi[ax] = 0.0
                    elif s * vj[ax] < s * vi[ax]:
                        vi[ax] = vj[ax]
                else:
                    pi[ax] = pi[ax] - s * (0.5 * pen)
                    pj[ax] = pj[ax] + s * (0.5 * pen)
                    if s * (vj[ax] - vi[ax]) < 0.0:
                        m = 0.5 * (vi[ax] + vj[ax])
                        vi[ax] = m
                        vj[ax] = m
                moved = True
        if not moved:
            break
    for i in range(n):
        if pr[i] == STATIC:
            continue
        p = P[i]
        v = V[i]
        h = H[i]
        for k in range(3):
            lo_k = bounds_lo[k] + h[k]
            hi_k = bounds_hi[k] - h[k]
            if p[k] < lo_k:
                p[k] = lo_k
                if v[k] < 0.0:
                    v[k] = 0.0
            elif p[k] > hi_k:
                p[k] = hi_k
                if v[k] > 0.0:
                    v[k] = 0.0
    pos[:] = P
    vel[:] = V
    return passes
