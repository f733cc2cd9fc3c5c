"""Baseline solvers checked against independent brute-force oracles."""

import itertools

import numpy as np
import pytest

from residiff.instances import (
    Tour,
    generate_er,
    generate_tsp,
    solution_to_tour,
    tour_length,
)
from residiff.oracles import (
    TooLargeError,
    exact_mis,
    farthest_insertion,
    greedy_mis,
    held_karp,
    label_mis,
    label_tour,
    label_tsp,
)


def brute_force_tsp(inst):
    best = None
    best_len = np.inf
    for perm in itertools.permutations(range(1, inst.n)):
        order = np.array((0,) + perm)
        length = tour_length(inst, Tour(order))
        if length < best_len - 1e-15:
            best_len = length
            best = order
    return best, best_len


def brute_force_mis(inst):
    best = 0
    nbrs = [set(inst.neighbors(v).tolist()) for v in range(inst.n)]
    for mask in range(1 << inst.n):
        nodes = [v for v in range(inst.n) if mask >> v & 1]
        if any(u in nbrs[v] for u, v in itertools.combinations(nodes, 2)):
            continue
        best = max(best, len(nodes))
    return best


@pytest.mark.parametrize("n,seed", [(4, 0), (5, 1), (6, 2), (7, 3), (8, 4), (8, 5)])
def test_held_karp_matches_brute_force(n, seed):
    inst = generate_tsp(n, "uniform", seed=seed, k=n - 1)
    tour, length = held_karp(inst)
    _, want = brute_force_tsp(inst)
    assert length == pytest.approx(want, abs=1e-12)
    assert tour_length(inst, tour) == pytest.approx(length, abs=1e-12)


def test_held_karp_rejects_large():
    inst = generate_tsp(17, "uniform", seed=0, k=16)
    with pytest.raises(TooLargeError):
        held_karp(inst)


def test_held_karp_trivial_sizes():
    inst = generate_tsp(4, "uniform", seed=9, k=3)
    tour, length = held_karp(inst)
    assert sorted(tour.order.tolist()) == [0, 1, 2, 3]
    assert length > 0


def test_farthest_insertion_rule_resimulation():
    """Re-run the textbook construction: start with the farthest pair,
    repeatedly insert the point farthest from the tour at its cheapest
    position."""
    inst = generate_tsp(12, "uniform", seed=21, k=11)
    got = farthest_insertion(inst).order

    d = np.linalg.norm(inst.coords[:, None] - inst.coords[None, :], axis=2)
    pair = np.unravel_index(np.argmax(np.triu(d)), d.shape)
    tour = [pair[0], pair[1]]
    left = set(range(12)) - set(tour)
    while left:
        dist_to_tour = {v: min(d[v, u] for u in tour) for v in left}
        v = max(sorted(left), key=lambda q: dist_to_tour[q])
        best_pos, best_inc = None, np.inf
        for i in range(len(tour)):
            a, b = tour[i], tour[(i + 1) % len(tour)]
            inc = d[a, v] + d[v, b] - d[a, b]
            if inc < best_inc - 1e-15:
                best_inc, best_pos = inc, i
        tour.insert(best_pos + 1, v)
        left.remove(v)
    # both should produce the same cycle (edge sets)
    def edges(o):
        return {tuple(sorted((int(o[i]), int(o[(i + 1) % len(o)])))) for i in range(len(o))}
    assert edges(got) == edges(tour)


def test_farthest_insertion_is_reasonable():
    # sanity: within 40% of optimal on small instances
    for seed in range(5):
        inst = generate_tsp(9, "uniform", seed=seed, k=8)
        fi = tour_length(inst, farthest_insertion(inst))
        _, opt = held_karp(inst)
        assert fi <= 1.4 * opt


@pytest.mark.parametrize("n,p,seed", [(8, 0.3, 0), (10, 0.25, 1), (12, 0.35, 2), (14, 0.2, 3)])
def test_exact_mis_matches_enumeration(n, p, seed):
    inst = generate_er(n, p, seed=seed)
    got = exact_mis(inst)
    assert len(got) == brute_force_mis(inst)
    chosen = set(got.tolist())
    for u, v in inst.edges:
        assert not (u in chosen and v in chosen)


def test_exact_mis_rejects_large():
    with pytest.raises(TooLargeError):
        exact_mis(generate_er(41, 0.1, seed=0))


def test_greedy_mis_rule_resimulation():
    """Ascending-degree scan, ties by node id, keep if no selected neighbor."""
    inst = generate_er(30, 0.2, seed=5)
    got = set(greedy_mis(inst).tolist())
    degs = inst.degrees()
    order = sorted(range(30), key=lambda v: (degs[v], v))
    want = set()
    for v in order:
        if not any(u in want for u in inst.neighbors(v)):
            want.add(v)
    assert got == want


def test_greedy_mis_independent_and_maximal():
    inst = generate_er(60, 0.1, seed=7)
    got = set(greedy_mis(inst).tolist())
    for u, v in inst.edges:
        assert not (u in got and v in got)
    for v in range(60):
        if v not in got:
            assert any(u in got for u in inst.neighbors(v)), "not maximal"


def test_label_tour_representable_and_optimal_when_complete():
    inst = generate_tsp(10, "uniform", seed=30, k=9)
    tour = label_tour(inst)
    _, opt = held_karp(inst)
    assert tour_length(inst, tour) == pytest.approx(opt, abs=1e-12)


def test_label_tsp_representable_on_sparse_instances():
    # k=3 instances rarely contain the optimal tour; label must still encode
    for seed in range(8):
        inst = generate_tsp(9, "uniform", seed=40 + seed, k=3)
        sol = label_tsp(inst)
        solution_to_tour(inst, sol)  # feasible single cycle


def test_label_tsp_large_path():
    inst = generate_tsp(30, "uniform", seed=50, k=8)
    sol = label_tsp(inst)
    tour = solution_to_tour(inst, sol)
    assert tour_length(inst, tour) > 0


def test_label_mis_exact_regime():
    inst = generate_er(20, 0.25, seed=9)
    sol = label_mis(inst)
    assert int((sol.values > 0).sum()) == brute_force_mis(generate_er(20, 0.25, seed=9))


def test_label_mis_greedy_regime_maximal():
    inst = generate_er(80, 0.08, seed=11)
    sol = label_mis(inst)
    chosen = set(np.flatnonzero(sol.values > 0).tolist())
    for u, v in inst.edges:
        assert not (u in chosen and v in chosen)
    for v in range(80):
        if v not in chosen:
            assert any(u in chosen for u in inst.neighbors(v))
