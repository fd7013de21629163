"""Hot numeric kernels.

Each kernel exists twice: a loop version compiled with numba ``@njit`` and a
vectorised numpy version. Set ``PERCEPATH_NO_NUMBA=1`` to force the numpy
path (also used automatically when numba cannot be imported).
"""

import math
import os

import numpy as np

_DISABLE = os.environ.get("PERCEPATH_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLE:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via env flag in subprocess
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


BACKEND = "numba" if HAVE_NUMBA else "numpy"

# Squared-distance sentinel for "no site"; large but overflow-free when summed.
_INF_SQ = 1e30


# ---------------------------------------------------------------------------
# exact 2D Euclidean feature transform
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _edt_columns_nb(occ):
    nx, ny = occ.shape
    g = np.empty((nx, ny))
    gi = np.full((nx, ny), -1, np.int64)
    for j in range(ny):
        last = -1
        for i in range(nx):
            if occ[i, j]:
                last = i
            if last >= 0:
                g[i, j] = i - last
                gi[i, j] = last
            else:
                g[i, j] = 1e15
        last = -1
        for i in range(nx - 1, -1, -1):
            if occ[i, j]:
                last = i
            if last >= 0 and last - i < g[i, j]:
                g[i, j] = last - i
                gi[i, j] = last
    return g, gi


@njit(cache=True, nogil=True)
def _edt_rows_nb(g, gi):
    # Felzenszwalb-Huttenlocher lower envelope of parabolas along each row.
    nx, ny = g.shape
    d2 = np.empty((nx, ny))
    si = np.full((nx, ny), -1, np.int64)
    sj = np.full((nx, ny), -1, np.int64)
    v = np.empty(ny, np.int64)
    z = np.empty(ny + 1)
    for i in range(nx):
        k = -1
        for q in range(ny):
            if gi[i, q] < 0:
                continue
            fq = g[i, q] * g[i, q]
            if k < 0:
                k = 0
                v[0] = q
                z[0] = -1e300
                z[1] = 1e300
                continue
            s = 0.0
            while True:
                p = v[k]
                fp = g[i, p] * g[i, p]
                s = ((fq + q * q) - (fp + p * p)) / (2.0 * (q - p))
                if s <= z[k]:
                    k -= 1
                else:
                    break
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = 1e300
        if k < 0:
            for q in range(ny):
                d2[i, q] = _INF_SQ
            continue
        kk = 0
        for q in range(ny):
            while z[kk + 1] < q:
                kk += 1
            p = v[kk]
            d2[i, q] = (q - p) * (q - p) + g[i, p] * g[i, p]
            si[i, q] = gi[i, p]
            sj[i, q] = p
    return d2, si, sj


def _edt_numpy(occ):
    nx, ny = occ.shape
    idx = np.arange(nx)[:, None]
    # nearest site along each column, forward and backward sweeps
    fwd = np.where(occ, idx, -1)
    fwd = np.maximum.accumulate(fwd, axis=0)
    bwd = np.where(occ, idx, nx + 10**9)
    bwd = np.minimum.accumulate(bwd[::-1], axis=0)[::-1]
    dfw = np.where(fwd >= 0, idx - fwd, np.inf)
    dbw = np.where(bwd < nx, bwd - idx, np.inf)
    use_b = dbw < dfw
    g = np.where(use_b, dbw, dfw)
    gi = np.where(use_b, bwd, fwd)
    gi = np.where(np.isfinite(g), gi, -1)
    # second pass: exact min over all columns of the row (quadratic per row)
    q = np.arange(ny)
    cost = np.where(np.isfinite(g), g, 0.0)[:, None, :] ** 2 + (q[:, None] - q[None, :])[None] ** 2
    cost = np.where(np.isfinite(g)[:, None, :], cost, np.inf)
    p = np.argmin(cost, axis=2)
    d2 = np.take_along_axis(cost, p[:, :, None], axis=2)[:, :, 0]
    si = np.take_along_axis(gi, p, axis=1)
    sj = p
    empty = ~np.isfinite(d2)
    d2 = np.where(empty, _INF_SQ, d2)
    si = np.where(empty, -1, si)
    sj = np.where(empty, -1, sj)
    return d2, si.astype(np.int64), sj.astype(np.int64)


def edt_2d(occ):
    """Exact squared Euclidean distance (in cells) and nearest site per cell.

    Returns ``(d2, si, sj)``; cells with no site anywhere get ``d2 = 1e30`` and
    ``si = sj = -1``.
    """
    occ = np.ascontiguousarray(occ, dtype=np.bool_)
    if HAVE_NUMBA:
        g, gi = _edt_columns_nb(occ)
        return _edt_rows_nb(g, gi)
    return _edt_numpy(occ)


# ---------------------------------------------------------------------------
# voxel traversal (Amanatides & Woo)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _first_hits_nb(occ, a, b):
    # a, b in grid units (cell i spans [i, i+1)); returns first occupied cell
    # strictly after a's cell, stopping before b's cell.
    nx, ny, nz = occ.shape
    n = b.shape[0]
    out = np.full((n, 3), -1, np.int64)
    for r in range(n):
        ax = a[r, 0]
        ay = a[r, 1]
        az = a[r, 2]
        d0 = b[r, 0] - ax
        d1 = b[r, 1] - ay
        d2 = b[r, 2] - az
        cx = int(math.floor(ax))
        cy = int(math.floor(ay))
        cz = int(math.floor(az))
        ex = int(math.floor(b[r, 0]))
        ey = int(math.floor(b[r, 1]))
        ez = int(math.floor(b[r, 2]))
        sx = 1 if d0 > 0 else (-1 if d0 < 0 else 0)
        sy = 1 if d1 > 0 else (-1 if d1 < 0 else 0)
        sz = 1 if d2 > 0 else (-1 if d2 < 0 else 0)
        tmx = ((cx + (sx > 0)) - ax) / d0 if sx != 0 else 1e300
        tmy = ((cy + (sy > 0)) - ay) / d1 if sy != 0 else 1e300
        tmz = ((cz + (sz > 0)) - az) / d2 if sz != 0 else 1e300
        tdx = abs(1.0 / d0) if sx != 0 else 1e300
        tdy = abs(1.0 / d1) if sy != 0 else 1e300
        tdz = abs(1.0 / d2) if sz != 0 else 1e300
        nsteps = abs(ex - cx) + abs(ey - cy) + abs(ez - cz)
        for _ in range(nsteps):
            if tmx <= tmy and tmx <= tmz:
                cx += sx
                tmx += tdx
            elif tmy <= tmz:
                cy += sy
                tmy += tdy
            else:
                cz += sz
                tmz += tdz
            if cx == ex and cy == ey and cz == ez:
                break
            if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz:
                break
            if occ[cx, cy, cz]:
                out[r, 0] = cx
                out[r, 1] = cy
                out[r, 2] = cz
                break
    return out


def _first_hits_numpy(occ, a, b):
    # Same stepping rule as the loop kernel, all rays advanced in lockstep.
    shape = np.array(occ.shape)
    n = b.shape[0]
    out = np.full((n, 3), -1, np.int64)
    if n == 0:
        return out
    a = np.broadcast_to(a, b.shape)
    d = b - a
    cur = np.floor(a).astype(np.int64)
    end = np.floor(b).astype(np.int64)
    step = np.sign(d).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tmax = np.where(step != 0, ((cur + (step > 0)) - a) / d, 1e300)
        tdel = np.where(step != 0, np.abs(1.0 / d), 1e300)
    remaining = np.abs(end - cur).sum(axis=1)
    active = remaining > 0
    rows = np.arange(n)
    while active.any():
        r = rows[active]
        tm = tmax[r]
        # axis choice with x <= y <= z tie priority
        ax = np.where((tm[:, 0] <= tm[:, 1]) & (tm[:, 0] <= tm[:, 2]), 0,
                      np.where(tm[:, 1] <= tm[:, 2], 1, 2))
        cur[r, ax] += step[r, ax]
        tmax[r, ax] += tdel[r, ax]
        remaining[r] -= 1
        c = cur[r]
        at_end = np.all(c == end[r], axis=1)
        outside = np.any((c < 0) | (c >= shape), axis=1)
        ok = ~at_end & ~outside
        hit = np.zeros(len(r), bool)
        cc = c[ok]
        hit[ok] = occ[cc[:, 0], cc[:, 1], cc[:, 2]]
        out[r[hit]] = c[hit]
        done = at_end | outside | hit | (remaining[r] <= 0)
        active[r[done]] = False
    return out


def first_hits(occ, a, b):
    """First occupied cell on each segment ``a -> b[r]`` (grid units).

    ``a`` is a single point (3,) or per-ray points (n, 3). The start cell and
    the end cell are never reported. Rows without a hit are ``-1``.
    """
    b = np.ascontiguousarray(np.atleast_2d(b), dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = np.ascontiguousarray(np.broadcast_to(a, b.shape))
    if HAVE_NUMBA:
        return _first_hits_nb(np.ascontiguousarray(occ), a, b)
    return _first_hits_numpy(occ, a, b)
