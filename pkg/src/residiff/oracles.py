"""Exact and heuristic reference solvers for labeling and ground truth.

Held-Karp and the MIS branch-and-bound are exact at desk scale; farthest
insertion plus 2-opt stands in for heavyweight heuristic solvers when exact
search is out of reach.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .instances import MisInstance, SolutionVector, Tour, TspInstance, tour_length

HELD_KARP_MAX_N = 16
EXACT_MIS_MAX_N = 40


class TooLargeError(ValueError):
    """Instance exceeds the exact solver's size bound."""


def _distance_matrix(inst: TspInstance) -> np.ndarray:
    diff = inst.coords[:, None, :] - inst.coords[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def held_karp(inst: TspInstance) -> tuple[Tour, float]:
    """Provably optimal tour over the complete Euclidean graph, n <= 16."""
    if inst.n > HELD_KARP_MAX_N:
        raise TooLargeError(f"held_karp limited to n <= {HELD_KARP_MAX_N}, got {inst.n}")
    if inst.n < 3:
        tour = Tour(np.arange(inst.n))
        return tour, tour_length(inst, tour)
    order = kernels.held_karp_core(_distance_matrix(inst))
    tour = Tour(order)
    return tour, tour_length(inst, tour)


def farthest_insertion(inst: TspInstance) -> Tour:
    """Insertion heuristic over the complete graph.

    Starts from the farthest pair of nodes (ties: lexicographically lowest
    pair), then repeatedly inserts the non-tour city farthest from the tour
    (ties: lowest index) at the position of cheapest insertion cost (ties:
    earliest position).
    """
    n = inst.n
    if n < 3:
        raise ValueError(f"farthest_insertion needs n >= 3, got {n}")
    dist = _distance_matrix(inst)
    upper = np.triu(dist)
    i, j = np.unravel_index(np.argmax(upper), upper.shape)
    order = [int(i), int(j)]
    in_tour = np.zeros(n, dtype=bool)
    in_tour[[i, j]] = True
    min_to_tour = np.minimum(dist[i], dist[j])

    for _ in range(n - 2):
        masked = np.where(in_tour, -np.inf, min_to_tour)
        c = int(np.argmax(masked))
        m = len(order)
        arr = np.array(order)
        nxt = np.roll(arr, -1)
        cost = dist[arr, c] + dist[c, nxt] - dist[arr, nxt]
        pos = int(np.argmin(cost))
        order.insert(pos + 1, c)
        in_tour[c] = True
        min_to_tour = np.minimum(min_to_tour, dist[c])
    return Tour(np.array(order, dtype=np.int64))


def exact_mis(inst: MisInstance) -> np.ndarray:
    """A maximum independent set (sorted node ids), n <= 40."""
    if inst.n > EXACT_MIS_MAX_N:
        raise TooLargeError(f"exact_mis limited to n <= {EXACT_MIS_MAX_N}, got {inst.n}")
    nbr = np.zeros(inst.n, dtype=np.int64)
    for u, v in inst.edges:
        nbr[u] |= 1 << int(v)
        nbr[v] |= 1 << int(u)
    mask = int(kernels.mis_bb_core(nbr))
    return np.array([v for v in range(inst.n) if mask >> v & 1], dtype=np.int64)


def greedy_mis(inst: MisInstance) -> np.ndarray:
    """Ascending-degree greedy independent set (ties: lowest index)."""
    order = np.lexsort((np.arange(inst.n), inst.degrees()))
    selected = np.zeros(inst.n, dtype=bool)
    kernels.greedy_select_core(order, inst.indptr, inst.indices, selected)
    return np.flatnonzero(selected).astype(np.int64)


def _tour_in_graph(inst: TspInstance, order: np.ndarray) -> bool:
    return all(
        inst.edge_index(int(order[i]), int(order[(i + 1) % inst.n])) >= 0
        for i in range(inst.n)
    )


def _restricted_two_opt(inst: TspInstance, order: np.ndarray, max_passes: int = 50):
    """First-improvement 2-opt accepting only swaps whose new edges exist
    in the instance edge list, so the tour stays representable."""
    order = order.copy()
    coords = inst.coords
    n = inst.n
    for _ in range(max_passes):
        improved = False
        for i in range(n - 1):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                a, b = int(order[i]), int(order[i + 1])
                c, d = int(order[j]), int(order[(j + 1) % n])
                if inst.edge_index(a, c) < 0 or inst.edge_index(b, d) < 0:
                    continue
                delta = (
                    np.hypot(*(coords[a] - coords[c]))
                    + np.hypot(*(coords[b] - coords[d]))
                    - np.hypot(*(coords[a] - coords[b]))
                    - np.hypot(*(coords[c] - coords[d]))
                )
                if delta < -1e-10:
                    order[i + 1 : j + 1] = order[i + 1 : j + 1][::-1]
                    improved = True
        if not improved:
            break
    return order


def label_tour(inst: TspInstance) -> Tour:
    """Training label: Held-Karp when exact is affordable, otherwise
    farthest insertion refined by 2-opt, projected into the instance's
    edge list when the unrestricted refinement leaves it."""
    from .decoding import two_opt

    if inst.n <= 12:
        tour = held_karp(inst)[0]
    else:
        tour = two_opt(inst, farthest_insertion(inst))
    if _tour_in_graph(inst, tour.order):
        return tour
    return Tour(_restricted_two_opt(inst, np.arange(inst.n)))


def label_tsp(inst: TspInstance) -> SolutionVector:
    from .instances import tour_to_solution

    return tour_to_solution(inst, label_tour(inst))


def label_mis(inst: MisInstance) -> SolutionVector:
    """Training label: exact for n <= 40, greedy plus an augmentation pass
    (every still-independent node gets added, ascending) above."""
    if inst.n <= EXACT_MIS_MAX_N:
        nodes = exact_mis(inst)
    else:
        selected = np.zeros(inst.n, dtype=bool)
        selected[greedy_mis(inst)] = True
        kernels.greedy_select_core(
            np.arange(inst.n), inst.indptr, inst.indices, selected
        )
        nodes = np.flatnonzero(selected)
    values = np.full(inst.n, -1.0)
    values[nodes] = 1.0
    return SolutionVector(values)
