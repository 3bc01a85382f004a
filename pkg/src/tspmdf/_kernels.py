"""Hot loops: insertion construction and 2-opt.

Every kernel exists twice, a numba ``@njit`` version operating on scalar loops
and a vectorised numpy version. Both evaluate distances and insertion costs
with the same floating point expressions in the same order, so for a given
input they return bit-identical tours. Which pair is used by the public API is
decided once at import time:

    TSPMDF_DISABLE_NUMBA=1   force the numpy path
    (unset / 0)              numba if importable, numpy otherwise
"""
from __future__ import annotations

import math
import os

import numpy as np

_DISABLE = os.environ.get("TSPMDF_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLE

# n above which the numpy path stops materialising the full distance matrix
MATRIX_LIMIT = 2000

TWO_OPT_EPS = 1e-12


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@_njit
def _dist_nb(xy, a, b):
    dx = xy[a, 0] - xy[b, 0]
    dy = xy[a, 1] - xy[b, 1]
    return math.sqrt(dx * dx + dy * dy)


@_njit
def _insertion_nb(xy, farthest):
    n = xy.shape[0]
    # seed pair: closest (nearest) or farthest pair, first in (i, j) order
    bi = 0
    bj = 1
    best = _dist_nb(xy, 0, 1)
    for i in range(n):
        for j in range(i + 1, n):
            d = _dist_nb(xy, i, j)
            if farthest:
                if d > best:
                    best = d
                    bi = i
                    bj = j
            else:
                if d < best:
                    best = d
                    bi = i
                    bj = j

    tour = np.empty(n, dtype=np.int64)
    tour[0] = bi
    tour[1] = bj
    m = 2
    in_tour = np.zeros(n, dtype=np.bool_)
    in_tour[bi] = True
    in_tour[bj] = True
    mind = np.empty(n, dtype=np.float64)
    for u in range(n):
        da = _dist_nb(xy, u, bi)
        db = _dist_nb(xy, u, bj)
        mind[u] = da if da < db else db

    for _ in range(n - 2):
        # selection of the next node
        sel = -1
        sv = 0.0
        for u in range(n):
            if in_tour[u]:
                continue
            if sel < 0:
                sel = u
                sv = mind[u]
            elif farthest:
                if mind[u] > sv:
                    sel = u
                    sv = mind[u]
            else:
                if mind[u] < sv:
                    sel = u
                    sv = mind[u]

        # cheapest insertion position
        pos = 0
        bc = 0.0
        for p in range(m):
            a = tour[p]
            b = tour[(p + 1) % m]
            c = _dist_nb(xy, a, sel) + _dist_nb(xy, sel, b) - _dist_nb(xy, a, b)
            if p == 0 or c < bc:
                bc = c
                pos = p
        for q in range(m, pos + 1, -1):
            tour[q] = tour[q - 1]
        tour[pos + 1] = sel
        m += 1
        in_tour[sel] = True

        for u in range(n):
            if not in_tour[u]:
                d = _dist_nb(xy, u, sel)
                if d < mind[u]:
                    mind[u] = d
    return tour


@_njit
def _two_opt_nb(xy, tour, max_passes, eps):
    n = tour.shape[0]
    t = tour.copy()
    passes = 0
    converged = False
    while passes < max_passes:
        best = -eps
        bi = -1
        bj = -1
        for i in range(n - 2):
            a = t[i]
            b = t[i + 1]
            dab = _dist_nb(xy, a, b)
            jend = n if i > 0 else n - 1
            for j in range(i + 2, jend):
                c = t[j]
                d = t[(j + 1) % n]
                delta = (_dist_nb(xy, a, c) + _dist_nb(xy, b, d)) - (dab + _dist_nb(xy, c, d))
                if delta < best:
                    best = delta
                    bi = i
                    bj = j
        passes += 1
        if bi < 0:
            converged = True
            break
        lo = bi + 1
        hi = bj
        while lo < hi:
            tmp = t[lo]
            t[lo] = t[hi]
            t[hi] = tmp
            lo += 1
            hi -= 1
    return t, passes, converged


# ---------------------------------------------------------------------------
# numpy fallbacks
# ---------------------------------------------------------------------------


def _row_dist(xy: np.ndarray, u: int, idx=None) -> np.ndarray:
    other = xy if idx is None else xy[idx]
    dx = other[:, 0] - xy[u, 0]
    dy = other[:, 1] - xy[u, 1]
    return np.sqrt(dx * dx + dy * dy)


def _pair_dist(xy: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dx = xy[a, 0] - xy[b, 0]
    dy = xy[a, 1] - xy[b, 1]
    return np.sqrt(dx * dx + dy * dy)


def _seed_pair_np(xy: np.ndarray, farthest: bool) -> tuple[int, int]:
    n = xy.shape[0]
    fill = -np.inf if farthest else np.inf
    if n <= MATRIX_LIMIT:
        dx = xy[:, None, 0] - xy[None, :, 0]
        dy = xy[:, None, 1] - xy[None, :, 1]
        # xy[a]-xy[b] as in the scalar kernel (sign irrelevant after squaring)
        d = np.sqrt(dx * dx + dy * dy)
        d[np.tril_indices(n)] = fill
        flat = int(np.argmax(d) if farthest else np.argmin(d))
        return divmod(flat, n)
    bi, bj, best = 0, 1, None
    for i in range(n - 1):
        row = _row_dist(xy, i, slice(i + 1, None))
        j = int(np.argmax(row) if farthest else np.argmin(row))
        v = row[j]
        if best is None or (v > best if farthest else v < best):
            bi, bj, best = i, i + 1 + j, v
    return bi, bj


def _insertion_np(xy: np.ndarray, farthest: bool) -> np.ndarray:
    n = xy.shape[0]
    bi, bj = _seed_pair_np(xy, farthest)
    tour = np.empty(n, dtype=np.int64)
    tour[0], tour[1] = bi, bj
    m = 2
    in_tour = np.zeros(n, dtype=bool)
    in_tour[[bi, bj]] = True
    mind = np.minimum(_row_dist(xy, bi), _row_dist(xy, bj))
    masked = np.where(in_tour, -np.inf if farthest else np.inf, mind)
    for _ in range(n - 2):
        sel = int(np.argmax(masked) if farthest else np.argmin(masked))
        cur = tour[:m]
        nxt = np.roll(cur, -1)
        cost = (_row_dist(xy, sel, cur) + _row_dist(xy, sel, nxt)) - _pair_dist(xy, cur, nxt)
        # scalar kernel evaluates d(a,u)+d(u,b)-d(a,b); addition is commutative in IEEE
        pos = int(np.argmin(cost))
        tour[pos + 2 : m + 1] = tour[pos + 1 : m]
        tour[pos + 1] = sel
        m += 1
        in_tour[sel] = True
        d = _row_dist(xy, sel)
        np.minimum(mind, d, out=mind)
        masked = np.where(in_tour, -np.inf if farthest else np.inf, mind)
    return tour


def _two_opt_np(xy: np.ndarray, tour: np.ndarray, max_passes: int, eps: float):
    n = tour.shape[0]
    t = tour.copy()
    passes = 0
    converged = False
    while passes < max_passes:
        best, bi, bj = -eps, -1, -1
        succ = np.roll(t, -1)
        for i in range(n - 2):
            a, b = t[i], t[i + 1]
            dab = _pair_dist(xy, np.array([a]), np.array([b]))[0]
            jend = n if i > 0 else n - 1
            if jend <= i + 2:
                continue
            c = t[i + 2 : jend]
            d = succ[i + 2 : jend]
            delta = (_row_dist(xy, a, c) + _row_dist(xy, b, d)) - (dab + _pair_dist(xy, c, d))
            k = int(np.argmin(delta))
            if delta[k] < best:
                best, bi, bj = delta[k], i, i + 2 + k
        passes += 1
        if bi < 0:
            converged = True
            break
        t[bi + 1 : bj + 1] = t[bi + 1 : bj + 1][::-1].copy()
    return t, passes, converged


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def insertion(xy: np.ndarray, farthest: bool, use_numba: bool | None = None) -> np.ndarray:
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _insertion_nb(xy, bool(farthest))
    return _insertion_np(xy, bool(farthest))


def two_opt(xy: np.ndarray, tour: np.ndarray, max_passes: int, use_numba: bool | None = None):
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    tour = np.ascontiguousarray(tour, dtype=np.int64)
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba:
        return _two_opt_nb(xy, tour, int(max_passes), TWO_OPT_EPS)
    return _two_opt_np(xy, tour, int(max_passes), TWO_OPT_EPS)
