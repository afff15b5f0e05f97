"""Compiled dynamic-programming kernels for DTW."""

import numba
import numpy as np

MISMATCH, ABSDIFF, HISTOGRAM, MEAN = 0, 1, 2, 3


@numba.njit(cache=True, inline="always")
def _cost(mode, xa, ya, xf, yf, i, j):
    if mode == MISMATCH:
        return 0.0 if xa[i] == ya[j] else 1.0
    if mode == ABSDIFF:
        a = xa[i]
        b = ya[j]
        return float(a - b) if a >= b else float(b - a)
    if mode == HISTOGRAM:
        s = 0.0
        for k in range(xf.shape[1]):
            s += abs(xf[i, k] - yf[j, k])
        return 0.5 * s
    return abs(xf[i, 0] - yf[j, 0])


@numba.njit(cache=True)
def dtw_full(mode, xa, ya):
    """Exact DTW distance with two rolling rows."""
    n, m = xa.shape[0], ya.shape[0]
    dummy = np.zeros((1, 1))
    inf = np.inf
    prev = np.full(m, inf)
    cur = np.empty(m)
    for i in range(n):
        for j in range(m):
            c = _cost(mode, xa, ya, dummy, dummy, i, j)
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = inf
                if i > 0:
                    best = prev[j]
                    if j > 0 and prev[j - 1] < best:
                        best = prev[j - 1]
                if j > 0 and cur[j - 1] < best:
                    best = cur[j - 1]
            cur[j] = c + best
        prev, cur = cur, prev
    return prev[m - 1]


@numba.njit(cache=True)
def dtw_window(mode, xa, ya, xf, yf, lo, hi):
    """DTW restricted to columns lo[i]..hi[i] of each row; returns distance and path."""
    n = lo.shape[0]
    m = hi[n - 1] + 1
    off = np.empty(n + 1, dtype=np.int64)
    off[0] = 0
    for i in range(n):
        off[i + 1] = off[i] + hi[i] - lo[i] + 1
    acc = np.full(off[n], np.inf)
    for i in range(n):
        for j in range(lo[i], hi[i] + 1):
            c = _cost(mode, xa, ya, xf, yf, i, j)
            if i == 0 and j == 0:
                acc[off[i]] = c
                continue
            best = np.inf
            if i > 0:
                if lo[i - 1] <= j <= hi[i - 1]:
                    best = acc[off[i - 1] + j - lo[i - 1]]
                if lo[i - 1] <= j - 1 <= hi[i - 1]:
                    v = acc[off[i - 1] + j - 1 - lo[i - 1]]
                    if v < best:
                        best = v
            if j > lo[i]:
                v = acc[off[i] + j - 1 - lo[i]]
                if v < best:
                    best = v
            acc[off[i] + j - lo[i]] = c + best
    # backtrack, preferring the diagonal on ties
    pi = np.empty(n + m, dtype=np.int64)
    pj = np.empty(n + m, dtype=np.int64)
    i, j, k = n - 1, m - 1, 0
    while True:
        pi[k] = i
        pj[k] = j
        k += 1
        if i == 0 and j == 0:
            break
        bi, bj, best = -1, -1, np.inf
        if i > 0 and j > 0 and lo[i - 1] <= j - 1 <= hi[i - 1]:
            best = acc[off[i - 1] + j - 1 - lo[i - 1]]
            bi, bj = i - 1, j - 1
        if i > 0 and lo[i - 1] <= j <= hi[i - 1]:
            v = acc[off[i - 1] + j - lo[i - 1]]
            if v < best:
                best, bi, bj = v, i - 1, j
        if j > lo[i]:
            v = acc[off[i] + j - 1 - lo[i]]
            if v < best:
                best, bi, bj = v, i, j - 1
        i, j = bi, bj
    return acc[off[n - 1] + m - 1 - lo[n - 1]], pi[:k][::-1].copy(), pj[:k][::-1].copy()


@numba.njit(cache=True)
def expand_window(pi, pj, n_coarse, m_coarse, n, m, radius):
    """Project a coarse path to the finer level and widen it by ``radius`` coarse cells."""
    clo = np.full(n_coarse, m_coarse, dtype=np.int64)
    chi = np.full(n_coarse, -1, dtype=np.int64)
    for k in range(pi.shape[0]):
        i0 = max(pi[k] - radius, 0)
        i1 = min(pi[k] + radius, n_coarse - 1)
        j0 = max(pj[k] - radius, 0)
        j1 = min(pj[k] + radius, m_coarse - 1)
        for i in range(i0, i1 + 1):
            if j0 < clo[i]:
                clo[i] = j0
            if j1 > chi[i]:
                chi[i] = j1
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = i // 2
        lo[i] = 2 * clo[c]
        hi[i] = min(2 * chi[c] + 1, m - 1)
    lo[0] = 0
    hi[n - 1] = m - 1
    # keep consecutive rows connected so a monotone path always exists
    for i in range(1, n):
        if lo[i] > hi[i - 1] + 1:
            lo[i] = hi[i - 1] + 1
        if lo[i] < lo[i - 1]:
            lo[i] = lo[i - 1]
        if hi[i] < hi[i - 1]:
            hi[i] = hi[i - 1]
    return lo, hi
