"""Lane equivalence for the hot kernels.

The numba lane must be a bit-for-bit drop-in for the numpy lane: same
tours, same masks, same float accumulations.  Every test here runs both
implementations on the same inputs and compares raw outputs, so any
divergence in scan order or tie-breaking shows up as an integer diff.
"""

import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from residiff.kernels import py_impl

nb_impl = pytest.importorskip(
    "residiff.kernels.nb_impl", reason="numba lane not importable"
)


def _coords(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.random((n, 2))


def _dist(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


@pytest.mark.parametrize("n", [4, 6, 9, 11])
def test_held_karp_core_lanes_agree(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(5):
        dist = _dist(_coords(rng, n))
        a = py_impl.held_karp_core(dist)
        b = nb_impl.held_karp_core(dist)
        assert np.array_equal(a, b)
        assert a[0] == 0 and sorted(a.tolist()) == list(range(n))


def test_held_karp_core_matches_permutation_scan():
    # small enough to enumerate every tour
    rng = np.random.default_rng(7)
    dist = _dist(_coords(rng, 7))

    def length(order):
        return sum(dist[order[i], order[(i + 1) % 7]] for i in range(7))

    opt = min(length((0,) + p) for p in itertools.permutations(range(1, 7)))
    for lane in (py_impl, nb_impl):
        order = lane.held_karp_core(dist)
        assert length(tuple(order)) == pytest.approx(opt, abs=1e-12)


@pytest.mark.parametrize("n", [5, 12, 30])
def test_two_opt_pass_lanes_agree(n):
    rng = np.random.default_rng(200 + n)
    for trial in range(8):
        coords = _coords(rng, n)
        start = rng.permutation(n).astype(np.int64)
        oa, ob = start.copy(), start.copy()
        ca, da = py_impl.two_opt_pass(coords, oa, 1e-10)
        cb, db = nb_impl.two_opt_pass(coords, ob, 1e-10)
        assert ca == cb
        assert np.array_equal(oa, ob)
        assert np.array_equal(da[:ca], db[:cb])
        assert (da[:ca] < -1e-10).all()


def test_two_opt_pass_deltas_match_length_differences():
    # replay the sweep: each accepted delta must equal the realized
    # length change of the tour at that moment
    rng = np.random.default_rng(3)
    coords = _coords(rng, 15)
    order = rng.permutation(15).astype(np.int64)

    def tour_len(o):
        return sum(
            float(np.hypot(*(coords[o[i]] - coords[o[(i + 1) % 15]])))
            for i in range(15)
        )

    before = tour_len(order)
    count, deltas = py_impl.two_opt_pass(coords, order, 1e-10)
    after = tour_len(order)
    assert after - before == pytest.approx(float(deltas[:count].sum()), abs=1e-9)


def _random_edge_stream(rng, coords):
    n = coords.shape[0]
    pairs = np.array(
        [(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64
    )
    rng.shuffle(pairs)
    return pairs[:, 0].copy(), pairs[:, 1].copy()


@pytest.mark.parametrize("n", [3, 8, 25])
def test_greedy_tour_core_lanes_agree(n):
    rng = np.random.default_rng(300 + n)
    for trial in range(6):
        coords = _coords(rng, n)
        src, dst = _random_edge_stream(rng, coords)
        # truncate the stream sometimes so the repair loop runs
        m = src.shape[0] if trial % 2 == 0 else max(1, src.shape[0] // 4)
        a = py_impl.greedy_tour_core(src[:m], dst[:m], coords)
        b = nb_impl.greedy_tour_core(src[:m], dst[:m], coords)
        assert np.array_equal(a, b)
        assert a[0] == 0 and sorted(a.tolist()) == list(range(n))


def test_greedy_select_core_lanes_agree():
    rng = np.random.default_rng(9)
    for n in (4, 12, 40):
        for _ in range(6):
            adj = np.triu(rng.random((n, n)) < 0.3, k=1)
            adj = adj | adj.T
            indptr = np.zeros(n + 1, dtype=np.int64)
            indptr[1:] = np.cumsum(adj.sum(axis=1))
            indices = np.concatenate(
                [np.flatnonzero(adj[v]) for v in range(n)]
            ).astype(np.int64) if adj.any() else np.empty(0, dtype=np.int64)
            order = rng.permutation(n).astype(np.int64)
            sa = np.zeros(n, dtype=np.bool_)
            sb = np.zeros(n, dtype=np.bool_)
            py_impl.greedy_select_core(order, indptr, indices, sa)
            nb_impl.greedy_select_core(order, indptr, indices, sb)
            assert np.array_equal(sa, sb)
            assert not (adj & np.outer(sa, sa)).any()


def _neighbor_masks(rng, n, p):
    adj = np.triu(rng.random((n, n)) < p, k=1)
    adj = adj | adj.T
    nbr = np.zeros(n, dtype=np.int64)
    for v in range(n):
        nbr[v] = sum(1 << u for u in np.flatnonzero(adj[v]))
    return adj, nbr


@pytest.mark.parametrize("n,p", [(6, 0.2), (12, 0.3), (16, 0.5), (18, 0.15)])
def test_mis_bb_core_lanes_agree(n, p):
    rng = np.random.default_rng(n * 31 + int(p * 100))
    for _ in range(5):
        adj, nbr = _neighbor_masks(rng, n, p)
        a = py_impl.mis_bb_core(nbr)
        b = int(nb_impl.mis_bb_core(nbr))
        assert a == b
        chosen = [v for v in range(n) if a >> v & 1]
        for u in chosen:
            assert nbr[u] & a == 0, "chosen set is not independent"


def test_mis_bb_core_is_maximum_against_enumeration():
    rng = np.random.default_rng(17)
    for _ in range(4):
        adj, nbr = _neighbor_masks(rng, 12, 0.35)
        best = 0
        for mask in range(1 << 12):
            ok = True
            m = mask
            while m:
                v = (m & -m).bit_length() - 1
                if nbr[v] & mask:
                    ok = False
                    break
                m &= m - 1
            if ok:
                best = max(best, mask.bit_count())
        assert py_impl.mis_bb_core(nbr).bit_count() == best
        assert int(nb_impl.mis_bb_core(nbr)).bit_count() == best


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_scatter_add_rows_lanes_bit_equal(seed):
    rng = np.random.default_rng(seed)
    rows, width, m = 7, 5, 40
    idx = rng.integers(0, rows, size=m)
    vals = rng.standard_normal((m, width))
    a = np.zeros((rows, width))
    b = np.zeros((rows, width))
    py_impl.scatter_add_rows(a, idx, vals)
    nb_impl.scatter_add_rows(b, idx, vals)
    assert np.array_equal(a, b)


def test_backend_env_flag_selects_lane():
    code = (
        "import residiff.kernels as k; print(k.active_backend())"
    )
    for forced in ("numpy", "numba"):
        env = dict(os.environ, RESIDIFF_BACKEND=forced)
        out = subprocess.run(
            [sys.executable, "-c", code], env=env,
            capture_output=True, text=True,
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == forced


def test_backend_env_flag_rejects_unknown():
    env = dict(os.environ, RESIDIFF_BACKEND="cuda")
    out = subprocess.run(
        [sys.executable, "-c", "import residiff.kernels"],
        env=env, capture_output=True, text=True,
    )
    assert out.returncode != 0
    assert "RESIDIFF_BACKEND" in out.stderr
