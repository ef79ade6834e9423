"""Compiled inner loops for grid ray tracing and correlative scan matching."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

MAX_LEVEL = 5  # root search node spans 2**5 = 32 offsets per axis


@njit(cache=True)
def trace_rays(cells, observed, x0, y0, ends, hit_mask, miss, hit, lo, hi):
    """Bresenham update from cell ``(x0, y0)`` to every row of ``ends``.

    Endpoints flagged in ``hit_mask`` receive ``hit`` once per call; every
    other cell crossed by a ray receives ``miss`` once per ray, except cells
    that are a hit endpoint of this same call. Values are clamped to
    ``[lo, hi]``; cells outside the grid are skipped.
    """
    h, w = cells.shape
    n = ends.shape[0]
    hit_here = np.zeros((h, w), dtype=np.bool_)
    for k in range(n):
        x1 = ends[k, 0]
        y1 = ends[k, 1]
        if hit_mask[k] and 0 <= x1 < w and 0 <= y1 < h:
            hit_here[y1, x1] = True
    for k in range(n):
        x1 = ends[k, 0]
        y1 = ends[k, 1]
        dx = abs(x1 - x0)
        dy = -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        x = x0
        y = y0
        while not (x == x1 and y == y1):
            if 0 <= x < w and 0 <= y < h and not hit_here[y, x]:
                v = cells[y, x] + miss
                cells[y, x] = lo if v < lo else v
                observed[y, x] = True
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x += sx
            if e2 <= dx:
                err += dx
                y += sy
    for k in range(n):
        x1 = ends[k, 0]
        y1 = ends[k, 1]
        if hit_mask[k] and 0 <= x1 < w and 0 <= y1 < h and hit_here[y1, x1]:
            hit_here[y1, x1] = False
            v = cells[y1, x1] + hit
            cells[y1, x1] = hi if v > hi else v
            observed[y1, x1] = True


@njit(cache=True)
def likelihood_pyramid(cells, pad, levels, radius=0, sigma=1.0):
    """Endpoint likelihood of a log-odds grid, padded by ``pad`` cells of 0.5,
    plus sliding-window maxima: ``out[h, y, x] = max(lik[y:y+2**h, x:x+2**h])``.

    The base likelihood of a cell is the logistic of its log-odds. With
    ``radius > 0`` it is widened into a likelihood field: the best of the
    neighbours within ``radius`` cells, each pulled towards 0.5 by the
    Gaussian weight ``exp(-d^2 / (2 sigma^2))`` of its distance ``d`` in
    cells. Neighbours off the grid count as 0.5.
    """
    h, w = cells.shape
    hp = h + 2 * pad
    wp = w + 2 * pad
    out = np.full((levels + 1, hp, wp), 0.5)
    lik = np.empty((h, w))
    for y in range(h):
        for x in range(w):
            lik[y, x] = 1.0 / (1.0 + math.exp(-cells[y, x]))
    if radius > 0:
        for y in range(h):
            for x in range(w):
                best = lik[y, x]
                for oy in range(-radius, radius + 1):
                    yy = y + oy
                    for ox in range(-radius, radius + 1):
                        xx = x + ox
                        if ox == 0 and oy == 0:
                            continue
                        if yy < 0 or yy >= h or xx < 0 or xx >= w:
                            v = 0.5
                        else:
                            g = math.exp(-(ox * ox + oy * oy) / (2.0 * sigma * sigma))
                            v = 0.5 + (lik[yy, xx] - 0.5) * g
                        if v > best:
                            best = v
                out[0, y + pad, x + pad] = best
    else:
        for y in range(h):
            for x in range(w):
                out[0, y + pad, x + pad] = lik[y, x]
    tmp = np.empty((hp, wp))
    for lv in range(1, levels + 1):
        s = 1 << (lv - 1)
        prev = out[lv - 1]
        for y in range(hp):
            for x in range(wp - s):
                a = prev[y, x]
                b = prev[y, x + s]
                tmp[y, x] = a if a > b else b
            for x in range(wp - s, wp):
                tmp[y, x] = prev[y, x] if prev[y, x] > 0.5 else 0.5
        cur = out[lv]
        for y in range(hp - s):
            for x in range(wp):
                a = tmp[y, x]
                b = tmp[y + s, x]
                cur[y, x] = a if a > b else b
        for y in range(hp - s, hp):
            for x in range(wp):
                cur[y, x] = tmp[y, x] if tmp[y, x] > 0.5 else 0.5
    return out


@njit(cache=True)
def _node_value(pyr, level, cx, cy, ox, oy):
    """Sum over points of ``pyr[level]`` at cell + offset."""
    s = 0.0
    for i in range(cx.shape[0]):
        s += pyr[level, cy[i] + oy, cx[i] + ox]
    return s


@njit(cache=True)
def _min_d2(ox, oy, size, n_lin):
    """Smallest squared displacement reachable inside a node."""
    mx = 0
    if ox - n_lin > 0:
        mx = ox - n_lin
    elif ox + size - 1 - n_lin < 0:
        mx = n_lin - (ox + size - 1)
    my = 0
    if oy - n_lin > 0:
        my = oy - n_lin
    elif oy + size - 1 - n_lin < 0:
        my = n_lin - (oy + size - 1)
    return mx * mx + my * my


@njit(cache=True)
def branch_and_bound(pyr, cxs, cys, n_lin, order, lin_pen, rot_pen):
    """Exact maximizer of the correlative score over rotations x offsets.

    ``cxs[k]``/``cys[k]`` hold padded cell indices of the points for rotation
    ``k``, already shifted by ``-n_lin`` so offset ``o`` in ``[0, 2*n_lin]``
    means displacement ``o - n_lin``. Points far outside the map are parked
    at index 0, inside the constant 0.5 padding. ``order[r]`` is the
    rotation with tie-break rank ``r``.
    Candidates are compared by (score desc, dx^2+dy^2 asc, |rotation| asc,
    enumeration order), where score is the likelihood sum minus
    ``lin_pen * (dx^2 + dy^2) + rot_pen[r]``. Returns ``(k, dx, dy, score)``.
    """
    n_rot = cxs.shape[0]
    span = 2 * n_lin + 1
    top = MAX_LEVEL
    # seed candidate: centre rotation, zero offset
    k0 = order[0]
    best_score = _node_value(pyr, 0, cxs[k0], cys[k0], n_lin, n_lin) - rot_pen[0]
    best_k = k0
    best_dx = 0
    best_dy = 0
    best_d2 = 0
    best_rank = 0
    # explicit DFS stack of (rank, level, ox, oy, bound)
    cap = n_rot * 4 * (top + 1) + 16
    st_rank = np.empty(cap, np.int64)
    st_lv = np.empty(cap, np.int64)
    st_ox = np.empty(cap, np.int64)
    st_oy = np.empty(cap, np.int64)
    st_b = np.empty(cap)
    # roots sorted by bound ascending so the best is popped first
    rb = np.empty(n_rot)
    for r in range(n_rot):
        k = order[r]
        rb[r] = _node_value(pyr, top, cxs[k], cys[k], 0, 0) - rot_pen[r]
    idx = np.argsort(rb, kind="mergesort")
    sp = 0
    for j in range(n_rot):
        r = idx[j]
        st_rank[sp] = r
        st_lv[sp] = top
        st_ox[sp] = 0
        st_oy[sp] = 0
        st_b[sp] = rb[r]
        sp += 1
    cb = np.empty(4)
    cox = np.empty(4, np.int64)
    coy = np.empty(4, np.int64)
    while sp > 0:
        sp -= 1
        r = st_rank[sp]
        lv = st_lv[sp]
        ox = st_ox[sp]
        oy = st_oy[sp]
        b = st_b[sp]
        if b < best_score:
            continue
        size = 1 << lv
        d2min = _min_d2(ox, oy, size, n_lin)
        if b == best_score:
            if d2min > best_d2 or (d2min == best_d2 and r >= best_rank):
                continue
        k = order[r]
        if lv == 0:
            dx = ox - n_lin
            dy = oy - n_lin
            d2 = dx * dx + dy * dy
            if b > best_score or d2 < best_d2 or (d2 == best_d2 and r < best_rank):
                best_score = b
                best_k = k
                best_dx = dx
                best_dy = dy
                best_d2 = d2
                best_rank = r
            continue
        half = size >> 1
        nc = 0
        for cyi in range(2):
            for cxi in range(2):
                nx = ox + cxi * half
                ny = oy + cyi * half
                if nx >= span or ny >= span:
                    continue
                cox[nc] = nx
                coy[nc] = ny
                cb[nc] = (_node_value(pyr, lv - 1, cxs[k], cys[k], nx, ny) - rot_pen[r]
                          - lin_pen * _min_d2(nx, ny, half, n_lin))
                nc += 1
        # push worst first so the best child is explored next
        for _ in range(nc):
            wi = 0
            for c in range(1, nc):
                if cb[c] < cb[wi]:
                    wi = c
            if cb[wi] >= best_score:
                st_rank[sp] = r
                st_lv[sp] = lv - 1
                st_ox[sp] = cox[wi]
                st_oy[sp] = coy[wi]
                st_b[sp] = cb[wi]
                sp += 1
            cb[wi] = np.inf
    return best_k, best_dx, best_dy, best_score
