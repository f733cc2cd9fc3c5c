"""Pure numpy/Python lane of the hot kernels.

Reference semantics for the numba lane: identical scan order, identical
tie-breaking, identical accumulation order.  Anything integer-driven must
match the compiled lane bit for bit.
"""

from __future__ import annotations

import math

import numpy as np


def held_karp_core(dist: np.ndarray) -> np.ndarray:
    """Optimal tour order for a complete distance matrix, n >= 3.

    Bitmask dynamic program over subsets containing node 0.  Returns the
    visiting order as int64, starting at node 0.  Ties resolve to the
    lowest-index predecessor.
    """
    n = dist.shape[0]
    full = 1 << n
    bits = 1 << np.arange(n, dtype=np.int64)
    dp = np.full((full, n), np.inf)
    dp[1, 0] = 0.0

    masks = np.arange(1, full, 2, dtype=np.int64)
    pops = np.array([int(m).bit_count() for m in masks], dtype=np.int64)
    cols = np.arange(n, dtype=np.int64)
    for c in range(1, n):
        layer = masks[pops == c]
        dp_layer = dp[layer]
        cand = (dp_layer[:, :, None] + dist[None, :, :]).min(axis=1)
        cand[(layer[:, None] & bits[None, :]) != 0] = np.inf
        cand[:, 0] = np.inf
        targets = layer[:, None] | bits[None, :]
        np.minimum.at(
            dp,
            (targets.ravel(), np.tile(cols, layer.size)),
            cand.ravel(),
        )

    closing = dp[full - 1] + dist[:, 0]
    closing[0] = np.inf
    j = int(np.argmin(closing))

    path = [j]
    mask = full - 1
    while mask != 1:
        sub = mask ^ (1 << j)
        j = int(np.argmin(dp[sub] + dist[:, j]))
        path.append(j)
        mask = sub
    path.reverse()
    return np.array(path, dtype=np.int64)


def two_opt_pass(coords: np.ndarray, order: np.ndarray, eps: float):
    """One first-improvement 2-opt sweep; mutates ``order`` in place.

    Returns (number of accepted swaps, per-swap length deltas).  Scan order
    is lexicographic over (i, j); each accepted swap reverses the segment
    order[i+1..j] immediately and the sweep continues from the next pair.
    """
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
                    order[lo], order[hi] = order[hi], order[lo]
                    lo += 1
                    hi -= 1
                deltas[count] = delta
                count += 1
    return count, deltas


def _find(parent: np.ndarray, x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def greedy_tour_core(
    src: np.ndarray, dst: np.ndarray, coords: np.ndarray
) -> np.ndarray:
    """Build a tour by accepting edges in the given order, n >= 3.

    An edge is accepted iff both endpoints have degree < 2 and it closes no
    cycle before all n nodes are linked.  Leftover path fragments are joined
    by repeatedly taking the shortest feasible endpoint pair over the
    complete graph (ties: lowest node pair).
    """
    n = coords.shape[0]
    parent = np.arange(n, dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    adj = np.full((n, 2), -1, dtype=np.int64)
    count = 0

    def accept(u: int, v: int) -> None:
        nonlocal count
        adj[u, deg[u]] = v
        adj[v, deg[v]] = u
        deg[u] += 1
        deg[v] += 1
        parent[_find(parent, u)] = _find(parent, v)
        count += 1

    for e in range(src.shape[0]):
        if count == n:
            break
        u, v = int(src[e]), int(dst[e])
        if deg[u] >= 2 or deg[v] >= 2:
            continue
        if _find(parent, u) == _find(parent, v) and count != n - 1:
            continue
        accept(u, v)

    while count < n - 1:
        best = np.inf
        bu = bv = -1
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
                    best, bu, bv = d, u, v
        accept(bu, bv)

    if count == n - 1:
        ends = [u for u in range(n) if deg[u] < 2]
        accept(ends[0], ends[1])

    order = np.empty(n, dtype=np.int64)
    order[0] = 0
    prev, cur = 0, int(adj[0, 0])
    for i in range(1, n):
        order[i] = cur
        nxt = int(adj[cur, 0]) if adj[cur, 0] != prev else int(adj[cur, 1])
        prev, cur = cur, nxt
    return order


def greedy_select_core(
    order: np.ndarray,
    indptr: np.ndarray,
    indices: np.ndarray,
    selected: np.ndarray,
) -> None:
    """Mark nodes in the given order unless a neighbor is already marked."""
    for k in range(order.shape[0]):
        v = int(order[k])
        if selected[v]:
            continue
        ok = True
        for p in range(indptr[v], indptr[v + 1]):
            if selected[indices[p]]:
                ok = False
                break
        if ok:
            selected[v] = True


def mis_bb_core(nbr: np.ndarray) -> int:
    """Maximum independent set of a graph with n <= 40 nodes.

    Branch and bound over int64 bitmasks: degree-<=1 vertices are taken
    greedily, the remaining candidate set is pruned by |chosen| + |cand|,
    and branching pivots on the max-degree vertex (ties: lowest index).
    Returns the chosen set as a bitmask; ties keep the first set found.
    """
    n = nbr.shape[0]
    neigh = [int(x) for x in nbr]
    best_mask = 0
    best_size = -1
    stack = [((1 << n) - 1, 0)]
    while stack:
        cand, chosen = stack.pop()
        reduced = True
        while reduced:
            reduced = False
            for v in range(n):
                bit = 1 << v
                if cand & bit and (neigh[v] & cand).bit_count() <= 1:
                    chosen |= bit
                    cand &= ~(bit | neigh[v])
                    reduced = True
                    break
        size = chosen.bit_count()
        if cand == 0:
            if size > best_size:
                best_size, best_mask = size, chosen
            continue
        if size + cand.bit_count() <= best_size:
            continue
        pivot, pivot_deg = -1, -1
        for v in range(n):
            if cand & (1 << v):
                d = (neigh[v] & cand).bit_count()
                if d > pivot_deg:
                    pivot, pivot_deg = v, d
        bit = 1 << pivot
        stack.append((cand & ~bit, chosen))
        stack.append((cand & ~(bit | neigh[pivot]), chosen | bit))
    return best_mask


def scatter_add_rows(out: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> None:
    """out[idx[m]] += vals[m], accumulated in index order."""
    np.add.at(out, idx, vals)
