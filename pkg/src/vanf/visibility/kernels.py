"""Compiled geometry kernels (numba, IEEE arithmetic, no fastmath).

Both the exhaustive reference paths and the BVH paths call the same scalar
triangle routines, so a BVH traversal and a brute-force scan return
bit-identical results; they differ only in which triangles they visit.
Ties on hit distance resolve to the lower triangle id in every path.
"""

from __future__ import annotations

import numpy as np
from numba import njit

EPS_HIT = 1e-5          # minimum ray parameter for a counted hit
EPS_PARALLEL = 1e-12    # determinant cutoff for parallel rays
_STACK = 128


@njit(cache=True, inline="always")
def _ray_tri(ox, oy, oz, dx, dy, dz, tri):
    """Moller-Trumbore; returns (t, u, v), t = -1 on miss. Two-sided."""
    e1x = tri[3] - tri[0]
    e1y = tri[4] - tri[1]
    e1z = tri[5] - tri[2]
    e2x = tri[6] - tri[0]
    e2y = tri[7] - tri[1]
    e2z = tri[8] - tri[2]
    hx = dy * e2z - dz * e2y
    hy = dz * e2x - dx * e2z
    hz = dx * e2y - dy * e2x
    a = e1x * hx + e1y * hy + e1z * hz
    if -EPS_PARALLEL < a < EPS_PARALLEL:
        return -1.0, 0.0, 0.0
    f = 1.0 / a
    sx = ox - tri[0]
    sy = oy - tri[1]
    sz = oz - tri[2]
    u = f * (sx * hx + sy * hy + sz * hz)
    if u < 0.0 or u > 1.0:
        return -1.0, 0.0, 0.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = f * (dx * qx + dy * qy + dz * qz)
    if v < 0.0 or u + v > 1.0:
        return -1.0, 0.0, 0.0
    t = f * (e2x * qx + e2y * qy + e2z * qz)
    return t, u, v


@njit(cache=True, inline="always")
def _ray_box(ox, oy, oz, dx, dy, dz, bmin, bmax, t_lo, t_hi):
    """Slab test on [t_lo, t_hi]; zero direction components handled exactly."""
    tn = t_lo
    tf = t_hi
    for ax in range(3):
        o = ox if ax == 0 else (oy if ax == 1 else oz)
        d = dx if ax == 0 else (dy if ax == 1 else dz)
        lo = bmin[ax]
        hi = bmax[ax]
        if d == 0.0:
            if o < lo or o > hi:
                return False
        else:
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tn:
                tn = t1
            if t2 < tf:
                tf = t2
            if tn > tf:
                return False
    return True


@njit(cache=True)
def brute_first_hit(origins, dirs, tris, out_t, out_tri, out_u, out_v):
    for r in range(origins.shape[0]):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        best_t = np.inf
        best_i = -1
        best_u = 0.0
        best_v = 0.0
        for i in range(tris.shape[0]):
            t, u, v = _ray_tri(ox, oy, oz, dx, dy, dz, tris[i])
            if t > EPS_HIT and (t < best_t or (t == best_t and i < best_i)):
                best_t = t
                best_i = i
                best_u = u
                best_v = v
        out_t[r] = best_t if best_i >= 0 else -1.0
        out_tri[r] = best_i
        out_u[r] = best_u
        out_v[r] = best_v


@njit(cache=True)
def bvh_first_hit(
    origins, dirs, node_min, node_max, node_left, node_right, node_start, node_count,
    tri_order, tris, out_t, out_tri, out_u, out_v,
):
    stack = np.empty(_STACK, dtype=np.int64)
    for r in range(origins.shape[0]):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        best_t = np.inf
        best_i = -1
        best_u = 0.0
        best_v = 0.0
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            limit = best_t if best_i >= 0 else np.inf
            if not _ray_box(ox, oy, oz, dx, dy, dz, node_min[node], node_max[node], EPS_HIT, limit):
                continue
            if node_left[node] < 0:
                s = node_start[node]
                for k in range(s, s + node_count[node]):
                    i = tri_order[k]
                    t, u, v = _ray_tri(ox, oy, oz, dx, dy, dz, tris[i])
                    if t > EPS_HIT and (t < best_t or (t == best_t and i < best_i)):
                        best_t = t
                        best_i = i
                        best_u = u
                        best_v = v
            else:
                stack[top] = node_left[node]
                top += 1
                stack[top] = node_right[node]
                top += 1
        out_t[r] = best_t if best_i >= 0 else -1.0
        out_tri[r] = best_i
        out_u[r] = best_u
        out_v[r] = best_v


@njit(cache=True)
def brute_any_hit(origins, dirs, t_max, tris, out_hit):
    for r in range(origins.shape[0]):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        hit = False
        for i in range(tris.shape[0]):
            t, u, v = _ray_tri(ox, oy, oz, dx, dy, dz, tris[i])
            if EPS_HIT < t < t_max[r]:
                hit = True
                break
        out_hit[r] = 1 if hit else 0


@njit(cache=True)
def bvh_any_hit(
    origins, dirs, t_max, node_min, node_max, node_left, node_right, node_start,
    node_count, tri_order, tris, out_hit,
):
    stack = np.empty(_STACK, dtype=np.int64)
    for r in range(origins.shape[0]):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        hit = False
        top = 0
        stack[top] = 0
        top += 1
        while top > 0 and not hit:
            top -= 1
            node = stack[top]
            if not _ray_box(ox, oy, oz, dx, dy, dz, node_min[node], node_max[node], EPS_HIT, t_max[r]):
                continue
            if node_left[node] < 0:
                s = node_start[node]
                for k in range(s, s + node_count[node]):
                    t, u, v = _ray_tri(ox, oy, oz, dx, dy, dz, tris[tri_order[k]])
                    if EPS_HIT < t < t_max[r]:
                        hit = True
                        break
            else:
                stack[top] = node_left[node]
                top += 1
                stack[top] = node_right[node]
                top += 1
        out_hit[r] = 1 if hit else 0


@njit(cache=True, inline="always")
def _point_tri_d2(px, py, pz, tri):
    """Squared point-triangle distance, 7-region closest-point decomposition."""
    e0x = tri[3] - tri[0]
    e0y = tri[4] - tri[1]
    e0z = tri[5] - tri[2]
    e1x = tri[6] - tri[0]
    e1y = tri[7] - tri[1]
    e1z = tri[8] - tri[2]
    dx = tri[0] - px
    dy = tri[1] - py
    dz = tri[2] - pz
    a = e0x * e0x + e0y * e0y + e0z * e0z
    b = e0x * e1x + e0y * e1y + e0z * e1z
    c = e1x * e1x + e1y * e1y + e1z * e1z
    d = e0x * dx + e0y * dy + e0z * dz
    e = e1x * dx + e1y * dy + e1z * dz
    det = a * c - b * b
    s = b * e - c * d
    t = b * d - a * e
    if s + t <= det:
        if s < 0.0:
            if t < 0.0:  # region 4
                if d < 0.0:
                    t = 0.0
                    s = min(max(-d / a, 0.0), 1.0)
                else:
                    s = 0.0
                    t = min(max(-e / c, 0.0), 1.0)
            else:  # region 3
                s = 0.0
                t = min(max(-e / c, 0.0), 1.0)
        elif t < 0.0:  # region 5
            t = 0.0
            s = min(max(-d / a, 0.0), 1.0)
        else:  # region 0
            inv = 1.0 / det
            s *= inv
            t *= inv
    else:
        if s < 0.0:  # region 2
            tmp0 = b + d
            tmp1 = c + e
            if tmp1 > tmp0:
                numer = tmp1 - tmp0
                denom = a - 2.0 * b + c
                s = min(max(numer / denom, 0.0), 1.0)
                t = 1.0 - s
            else:
                s = 0.0
                t = min(max(-e / c, 0.0), 1.0)
        elif t < 0.0:  # region 6
            tmp0 = b + e
            tmp1 = a + d
            if tmp1 > tmp0:
                numer = tmp1 - tmp0
                denom = a - 2.0 * b + c
                t = min(max(numer / denom, 0.0), 1.0)
                s = 1.0 - t
            else:
                t = 0.0
                s = min(max(-d / a, 0.0), 1.0)
        else:  # region 1
            numer = (c + e) - (b + d)
            if numer <= 0.0:
                s = 0.0
            else:
                denom = a - 2.0 * b + c
                s = min(max(numer / denom, 0.0), 1.0)
            t = 1.0 - s
    cx = tri[0] + s * e0x + t * e1x - px
    cy = tri[1] + s * e0y + t * e1y - py
    cz = tri[2] + s * e0z + t * e1z - pz
    return cx * cx + cy * cy + cz * cz


@njit(cache=True)
def brute_closest_d2(points, tris, out_d2):
    for n in range(points.shape[0]):
        px, py, pz = points[n, 0], points[n, 1], points[n, 2]
        best = np.inf
        for i in range(tris.shape[0]):
            d2 = _point_tri_d2(px, py, pz, tris[i])
            if d2 < best:
                best = d2
        out_d2[n] = best


@njit(cache=True, inline="always")
def _box_d2(px, py, pz, bmin, bmax):
    d2 = 0.0
    for ax in range(3):
        p = px if ax == 0 else (py if ax == 1 else pz)
        if p < bmin[ax]:
            d2 += (bmin[ax] - p) * (bmin[ax] - p)
        elif p > bmax[ax]:
            d2 += (p - bmax[ax]) * (p - bmax[ax])
    return d2


@njit(cache=True)
def bvh_closest_d2(
    points, node_min, node_max, node_left, node_right, node_start, node_count,
    tri_order, tris, out_d2,
):
    stack = np.empty(_STACK, dtype=np.int64)
    for n in range(points.shape[0]):
        px, py, pz = points[n, 0], points[n, 1], points[n, 2]
        best = np.inf
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _box_d2(px, py, pz, node_min[node], node_max[node]) >= best:
                continue
            if node_left[node] < 0:
                s = node_start[node]
                for k in range(s, s + node_count[node]):
                    d2 = _point_tri_d2(px, py, pz, tris[tri_order[k]])
                    if d2 < best:
                        best = d2
            else:
                l = node_left[node]
                r = node_right[node]
                dl = _box_d2(px, py, pz, node_min[l], node_max[l])
                dr = _box_d2(px, py, pz, node_min[r], node_max[r])
                # push the farther child first so the nearer is processed next
                if dl <= dr:
                    stack[top] = r
                    top += 1
                    stack[top] = l
                    top += 1
                else:
                    stack[top] = l
                    top += 1
                    stack[top] = r
                    top += 1
        out_d2[n] = best


@njit(cache=True)
def bvh_count_crossings(
    points, direction, node_min, node_max, node_left, node_right, node_start,
    node_count, tri_order, tris, tri_mesh, out_counts,
):
    """Per-mesh crossing counts along one fixed direction (t > 0)."""
    stack = np.empty(_STACK, dtype=np.int64)
    dx, dy, dz = direction[0], direction[1], direction[2]
    for n in range(points.shape[0]):
        px, py, pz = points[n, 0], points[n, 1], points[n, 2]
        c0 = 0
        c1 = 0
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            if not _ray_box(px, py, pz, dx, dy, dz, node_min[node], node_max[node], 0.0, np.inf):
                continue
            if node_left[node] < 0:
                s = node_start[node]
                for k in range(s, s + node_count[node]):
                    i = tri_order[k]
                    t, u, v = _ray_tri(px, py, pz, dx, dy, dz, tris[i])
                    if t > 0.0:
                        if tri_mesh[i] == 0:
                            c0 += 1
                        else:
                            c1 += 1
            else:
                stack[top] = node_left[node]
                top += 1
                stack[top] = node_right[node]
                top += 1
        out_counts[n, 0] = c0
        out_counts[n, 1] = c1


@njit(cache=True)
def brute_count_crossings(points, direction, tris, tri_mesh, out_counts):
    dx, dy, dz = direction[0], direction[1], direction[2]
    for n in range(points.shape[0]):
        px, py, pz = points[n, 0], points[n, 1], points[n, 2]
        c0 = 0
        c1 = 0
        for i in range(tris.shape[0]):
            t, u, v = _ray_tri(px, py, pz, dx, dy, dz, tris[i])
            if t > 0.0:
                if tri_mesh[i] == 0:
                    c0 += 1
                else:
                    c1 += 1
        out_counts[n, 0] = c0
        out_counts[n, 1] = c1


@njit(cache=True)
def brute_nearest_vertex(points, verts, out_idx):
    """First index of the squared-distance minimum, scanning ascending."""
    for i in range(points.shape[0]):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        bj = -1
        for j in range(verts.shape[0]):
            dx = verts[j, 0] - px
            dy = verts[j, 1] - py
            dz = verts[j, 2] - pz
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
                bj = j
        out_idx[i] = bj
