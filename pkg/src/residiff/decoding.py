"""Turning heatmaps into feasible discrete solutions.

Three strategies: greedy construction from scores, local 2-opt refinement,
and best-of-m sampling.  All decoders are total: any score vector in [0,1]
yields a feasible solution, adversarial inputs included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .instances import (
    MisInstance,
    Tour,
    TspInstance,
    tour_length,
)


@dataclass(eq=False)
class Heatmap:
    """Per-variable selection scores in [0, 1]."""

    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        self.scores.setflags(write=False)
        if self.scores.ndim != 1:
            raise ValueError("scores must be one-dimensional")
        if not np.all((self.scores >= 0.0) & (self.scores <= 1.0)):
            raise ValueError("scores must lie in [0, 1]")


def _check_len(h: Heatmap, n: int, what: str) -> None:
    if h.scores.shape[0] != n:
        raise ValueError(f"heatmap has {h.scores.shape[0]} scores, {what} needs {n}")


def greedy_decode_tsp(inst: TspInstance, h: Heatmap) -> Tour:
    """Accept edges in descending score order (ties: lower edge index)
    while both endpoints have degree < 2 and no premature cycle forms.
    Leftover fragments are joined by nearest feasible endpoints over the
    complete graph, so the result is always a Hamiltonian cycle."""
    _check_len(h, inst.num_variables, "greedy_decode_tsp")
    order = np.lexsort((np.arange(inst.num_variables), -h.scores))
    src = np.ascontiguousarray(inst.edges[order, 0])
    dst = np.ascontiguousarray(inst.edges[order, 1])
    return Tour(kernels.greedy_tour_core(src, dst, inst.coords))


def greedy_decode_mis(inst: MisInstance, h: Heatmap) -> np.ndarray:
    """Accept nodes in descending score order (ties: lower index) when no
    neighbor is accepted yet, then sweep ascending once more so the set is
    maximal.  Returns sorted node ids."""
    _check_len(h, inst.n, "greedy_decode_mis")
    order = np.lexsort((np.arange(inst.n), -h.scores))
    selected = np.zeros(inst.n, dtype=bool)
    kernels.greedy_select_core(order, inst.indptr, inst.indices, selected)
    kernels.greedy_select_core(
        np.arange(inst.n, dtype=np.int64), inst.indptr, inst.indices, selected
    )
    return np.flatnonzero(selected).astype(np.int64)


def two_opt_with_trace(
    inst: TspInstance, tour: Tour, max_passes: int = 50
) -> tuple[Tour, np.ndarray]:
    """2-opt refinement plus the length after every accepted swap.

    trace[0] is the input length; each accepted swap appends its strictly
    smaller successor.  Sweeps are first-improvement over pairs (i, j) in
    lexicographic order until a full sweep accepts nothing or max_passes
    sweeps have run.
    """
    if tour.order.shape[0] != inst.n:
        raise ValueError("tour does not cover the instance")
    order = tour.order.copy()
    lengths = [tour_length(inst, tour)]
    for _ in range(max_passes):
        count, deltas = kernels.two_opt_pass(inst.coords, order, 1e-10)
        if count == 0:
            break
        lengths.extend(lengths[-1] + np.cumsum(deltas[:count]))
    return Tour(order), np.array(lengths)


def two_opt(inst: TspInstance, tour: Tour, max_passes: int = 50) -> Tour:
    return two_opt_with_trace(inst, tour, max_passes)[0]


def sample_decode(
    denoiser,
    inst: TspInstance | MisInstance,
    X_d,
    cfg,
    m: int,
    rng: np.random.Generator,
):
    """Best of m independently sampled heatmaps.

    Each draw runs on its own child rng stream (stream i is the same no
    matter what m is, so best-of-m cost is monotone in m).  TSP candidates
    are greedy-decoded then 2-opt refined and ranked by length; MIS
    candidates are greedy-decoded and ranked by size.  Ties keep the
    lowest draw index.
    """
    from .diffusion import sample_heatmap

    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    is_tsp = isinstance(inst, TspInstance)
    best = None
    best_cost = None
    for child in rng.spawn(m):
        h = sample_heatmap(denoiser, inst, X_d, cfg, child)
        if is_tsp:
            cand = two_opt(inst, greedy_decode_tsp(inst, h))
            cost = tour_length(inst, cand)
            better = best_cost is None or cost < best_cost
        else:
            cand = greedy_decode_mis(inst, h)
            cost = cand.shape[0]
            better = best_cost is None or cost > best_cost
        if better:
            best, best_cost = cand, cost
    return best
