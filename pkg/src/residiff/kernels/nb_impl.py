"""Numba lane of the hot kernels.

Same scan order and tie-breaking as ``py_impl``; see that module for the
semantic reference.  fastmath stays off so float results match the numpy
lane bit for bit where the operation order is identical.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def _popcount(x: int) -> int:
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(**_OPTS)
def held_karp_core(dist: np.ndarray) -> np.ndarray:
    n = dist.shape[0]
    full = 1 << n
    dp = np.full((full, n), np.inf)
    par = np.full((full, n), -1, dtype=np.int16)
    dp[1, 0] = 0.0

    for mask in range(3, full, 2):
        for j in range(1, n):
            if not mask & (1 << j):
                continue
            sub = mask ^ (1 << j)
            best = np.inf
            arg = -1
            for i in range(n):
                if not sub & (1 << i):
                    continue
                c = dp[sub, i] + dist[i, j]
                if c < best:
                    best = c
                    arg = i
            dp[mask, j] = best
            par[mask, j] = arg

    best = np.inf
    j = -1
    for i in range(1, n):
        c = dp[full - 1, i] + dist[i, 0]
        if c < best:
            best = c
            j = i

    order = np.empty(n, dtype=np.int64)
    mask = full - 1
    pos = n - 1
    while mask != 1:
        order[pos] = j
        pos -= 1
        nxt = par[mask, j]
        mask ^= 1 << j
        j = nxt
    order[0] = 0
    return order


@njit(**_OPTS)
def two_opt_pass(coords: np.ndarray, order: np.ndarray, eps: float):
    n = order.shape[0]
    deltas = np.empty(n * (n - 1) // 2 + 1)
    count = 0
    for i in range(n - 1):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            a, b = order[i], order[i + 1]
            c, d = order[j], order[(j + 1) % n]
            dax = coords[a, 0] - coords[c, 0]
            day = coords[a, 1] - coords[c, 1]
            dbx = coords[b, 0] - coords[d, 0]
            dby = coords[b, 1] - coords[d, 1]
            oax = coords[a, 0] - coords[b, 0]
            oay = coords[a, 1] - coords[b, 1]
            ocx = coords[c, 0] - coords[d, 0]
            ocy = coords[c, 1] - coords[d, 1]
            delta = (
                math.sqrt(dax * dax + day * day)
                + math.sqrt(dbx * dbx + dby * dby)
                - math.sqrt(oax * oax + oay * oay)
                - math.sqrt(ocx * ocx + ocy * ocy)
            )
            if delta < -eps:
                lo, hi = i + 1, j
                while lo < hi:
                    tmp = order[lo]
                    order[lo] = order[hi]
                    order[hi] = tmp
                    lo += 1
                    hi -= 1
                deltas[count] = delta
                count += 1
    return count, deltas


@njit(**_OPTS)
def _find(parent: np.ndarray, x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(**_OPTS)
def _accept(
    adj: np.ndarray, deg: np.ndarray, parent: np.ndarray, u: int, v: int
) -> None:
    adj[u, deg[u]] = v
    adj[v, deg[v]] = u
    deg[u] += 1
    deg[v] += 1
    parent[_find(parent, u)] = _find(parent, v)


@njit(**_OPTS)
def greedy_tour_core(
    src: np.ndarray, dst: np.ndarray, coords: np.ndarray
) -> np.ndarray:
    n = coords.shape[0]
    parent = np.arange(n, dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    adj = np.full((n, 2), -1, dtype=np.int64)
    count = 0

    for e in range(src.shape[0]):
        if count == n:
            break
        u, v = src[e], dst[e]
        if deg[u] >= 2 or deg[v] >= 2:
            continue
        if _find(parent, u) == _find(parent, v) and count != n - 1:
            continue
        _accept(adj, deg, parent, u, v)
        count += 1

    while count < n - 1:
        best = np.inf
        bu = -1
        bv = -1
        for u in range(n):
            if deg[u] >= 2:
                continue
            ru = _find(parent, u)
            for v in range(u + 1, n):
                if deg[v] >= 2 or _find(parent, v) == ru:
                    continue
                dx = coords[u, 0] - coords[v, 0]
                dy = coords[u, 1] - coords[v, 1]
                d = math.sqrt(dx * dx + dy * dy)
                if d < best:
                    best = d
                    bu = u
                    bv = v
        _accept(adj, deg, parent, bu, bv)
        count += 1

    if count == n - 1:
        e0 = -1
        e1 = -1
        for u in range(n):
            if deg[u] < 2:
                if e0 == -1:
                    e0 = u
                else:
                    e1 = u
        _accept(adj, deg, parent, e0, e1)

    order = np.empty(n, dtype=np.int64)
    order[0] = 0
    prev = 0
    cur = adj[0, 0]
    for i in range(1, n):
        order[i] = cur
        if adj[cur, 0] != prev:
            nxt = adj[cur, 0]
        else:
            nxt = adj[cur, 1]
        prev = cur
        cur = nxt
    return order


@njit(**_OPTS)
def greedy_select_core(
    order: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    selected: np.ndarray,
) -> None:
    for k in range(order.shape[0]):
        v = order[k]
        if selected[v]:
            continue
        ok = True
        for p in range(indptr[v], indptr[v + 1]):
            if selected[indices[p]]:
                ok = False
                break
        if ok:
            selected[v] = True


@njit(**_OPTS)
def mis_bb_core(nbr: np.ndarray) -> int:
    n = nbr.shape[0]
    cap = 2 * n + 8
    stack_cand = np.empty(cap, dtype=np.int64)
    stack_chosen = np.empty(cap, dtype=np.int64)
    stack_cand[0] = (1 << n) - 1
    stack_chosen[0] = 0
    sp = 1
    best_mask = 0
    best_size = -1

    while sp > 0:
        sp -= 1
        cand = stack_cand[sp]
        chosen = stack_chosen[sp]
        reduced = True
        while reduced:
            reduced = False
            for v in range(n):
                bit = 1 << v
                if cand & bit and _popcount(nbr[v] & cand) <= 1:
                    chosen |= bit
                    cand &= ~(bit | nbr[v])
                    reduced = True
                    break
        size = _popcount(chosen)
        if cand == 0:
            if size > best_size:
                best_size = size
                best_mask = chosen
            continue
        if size + _popcount(cand) <= best_size:
            continue
        pivot = -1
        pivot_deg = -1
        for v in range(n):
            if cand & (1 << v):
                d = _popcount(nbr[v] & cand)
                if d > pivot_deg:
                    pivot = v
                    pivot_deg = d
        bit = 1 << pivot
        stack_cand[sp] = cand & ~bit
        stack_chosen[sp] = chosen
        sp += 1
        stack_cand[sp] = cand & ~(bit | nbr[pivot])
        stack_chosen[sp] = chosen | bit
        sp += 1
    return best_mask


@njit(**_OPTS)
def scatter_add_rows(out: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> None:
    for m in range(idx.shape[0]):
        row = idx[m]
        for k in range(vals.shape[1]):
            out[row, k] += vals[m, k]
