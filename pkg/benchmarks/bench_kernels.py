"""Side-by-side timing of the numpy and numba kernel lanes.

Runs every hot kernel on a representative workload in both lanes within
one process (lane modules are imported directly, so RESIDIFF_BACKEND does
not matter here), checks that the lanes agree, and prints min-over-repeats
wall times with the speedup factor.

    python3 benchmarks/bench_kernels.py [--repeat N] [--seed S]
"""

import argparse
import time

import numpy as np

from residiff.instances import generate_er, generate_tsp
from residiff.kernels import active_backend, py_impl

try:
    from residiff.kernels import nb_impl
except ImportError:
    nb_impl = None


def _timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _workloads(seed):
    rng = np.random.default_rng(seed)

    hk = generate_tsp(13, "uniform", seed=seed, k=12)
    diff = hk.coords[:, None, :] - hk.coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])

    big = generate_tsp(400, "uniform", seed=seed + 1, k=16)
    tour0 = rng.permutation(400).astype(np.int64)

    scores = rng.random(big.num_variables)
    by_score = np.argsort(-scores, kind="stable")
    src = big.edges[by_score, 0].astype(np.int64)
    dst = big.edges[by_score, 1].astype(np.int64)

    mis = generate_er(3000, 0.002, seed=seed + 2)
    sel_order = np.lexsort((np.arange(mis.n), mis.degrees())).astype(np.int64)

    small = generate_er(30, 0.3, seed=seed + 3)
    nbr = np.zeros(small.n, dtype=np.int64)
    for u, v in small.edges:
        nbr[u] |= 1 << int(v)
        nbr[v] |= 1 << int(u)

    idx = rng.integers(0, 2000, size=40_000).astype(np.int64)
    vals = rng.standard_normal((40_000, 64))

    def bench(impl):
        out = {}

        out["held_karp n=13"] = lambda: impl.held_karp_core(dist)

        def two_opt_run():
            order = tour0.copy()
            impl.two_opt_pass(big.coords, order, 1e-10)

        out["two_opt_pass n=400"] = two_opt_run
        out["greedy_tour n=400"] = lambda: impl.greedy_tour_core(src, dst, big.coords)

        def select_run():
            selected = np.zeros(mis.n, dtype=bool)
            impl.greedy_select_core(sel_order, mis.indptr, mis.indices, selected)

        out["greedy_select n=3000"] = select_run
        out["mis_bb n=30"] = lambda: impl.mis_bb_core(nbr)

        def scatter_run():
            acc = np.zeros((2000, 64))
            impl.scatter_add_rows(acc, idx, vals)

        out["scatter_add 40k x 64"] = scatter_run
        return out

    def agree():
        checks = {}
        checks["held_karp n=13"] = np.array_equal(
            py_impl.held_karp_core(dist), nb_impl.held_karp_core(dist)
        )
        o1, o2 = tour0.copy(), tour0.copy()
        c1, d1 = py_impl.two_opt_pass(big.coords, o1, 1e-10)
        c2, d2 = nb_impl.two_opt_pass(big.coords, o2, 1e-10)
        checks["two_opt_pass n=400"] = (
            c1 == c2
            and np.array_equal(o1, o2)
            and np.array_equal(d1[:c1], d2[:c2])
        )
        checks["greedy_tour n=400"] = np.array_equal(
            py_impl.greedy_tour_core(src, dst, big.coords),
            nb_impl.greedy_tour_core(src, dst, big.coords),
        )
        s1 = np.zeros(mis.n, dtype=bool)
        s2 = np.zeros(mis.n, dtype=bool)
        py_impl.greedy_select_core(sel_order, mis.indptr, mis.indices, s1)
        nb_impl.greedy_select_core(sel_order, mis.indptr, mis.indices, s2)
        checks["greedy_select n=3000"] = np.array_equal(s1, s2)
        checks["mis_bb n=30"] = int(py_impl.mis_bb_core(nbr)) == int(
            nb_impl.mis_bb_core(nbr)
        )
        a1 = np.zeros((2000, 64))
        a2 = np.zeros((2000, 64))
        py_impl.scatter_add_rows(a1, idx, vals)
        nb_impl.scatter_add_rows(a2, idx, vals)
        checks["scatter_add 40k x 64"] = np.allclose(a1, a2, rtol=1e-12)
        return checks

    return bench, agree


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats, min kept")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"default lane in this environment: {active_backend()}")
    bench, agree = _workloads(args.seed)

    if nb_impl is None:
        print("numba lane unavailable; timing the numpy lane only")
        for name, fn in bench(py_impl).items():
            print(f"{name:24s} numpy {1e3 * _timeit(fn, args.repeat):9.2f} ms")
        return

    # first call per kernel pays jit compilation; warm before timing
    for fn in bench(nb_impl).values():
        fn()

    checks = agree()
    py_fns = bench(py_impl)
    nb_fns = bench(nb_impl)
    print(f"{'kernel':24s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}  lanes agree")
    for name in py_fns:
        t_py = _timeit(py_fns[name], args.repeat)
        t_nb = _timeit(nb_fns[name], args.repeat)
        print(
            f"{name:24s} {1e3 * t_py:8.2f}ms {1e3 * t_nb:8.2f}ms "
            f"{t_py / t_nb:7.1f}x  {checks[name]}"
        )


if __name__ == "__main__":
    main()
