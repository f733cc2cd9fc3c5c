"""Scaling to large TSP instances by overlapping-subgraph search.

Large graphs are covered by fixed-size subgraphs centered on the least
visited node, each rescaled to the unit square so a model trained at the
subgraph scale applies.  Per-subgraph heatmaps are merged by occurrence
counts into a global heatmap; repeated merge/decode trials with different
heatmap combinations keep the best tour found.

Local k-NN edges may pair nodes that the sparse global edge list does not;
such edges are appended to an extended global variable space so their
merged scores are not lost.  MIS is out of scope here: node-overlap
merging has no defined semantics for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decoding import Heatmap, greedy_decode_tsp, two_opt
from .diffusion import SamplerConfig, sample_heatmap
from .instances import (
    Tour,
    TspInstance,
    build_tsp_instance,
    degraded_solution,
    replace_edges,
    tour_length,
)


class ConsistencyError(ValueError):
    """Occurrence counts disagree with the subgraph maps they came from."""


@dataclass(eq=False)
class Subgraph:
    """One normalized window of a large instance.

    Local node i is global node nodes[i]; local variable e is global
    extended variable edge_map[e].  Indices >= the original variable count
    denote edges added to the extended space by this decomposition.
    """

    nodes: np.ndarray
    local: TspInstance
    edge_map: np.ndarray

    @property
    def node_map(self) -> np.ndarray:
        return self.nodes


@dataclass(eq=False)
class Occurrence:
    """Coverage counters over the extended variable space."""

    o_v: np.ndarray
    o_ij: np.ndarray
    edges: np.ndarray
    base_vars: int
    omega: int


@dataclass(eq=False)
class SearchConfig:
    """Decomposition and trial-search settings."""

    subgraph_size: int = 50
    omega: int = 1
    q: int = 2
    n_trials: int = 50
    k: int = 16
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(K=1))

    def __post_init__(self):
        if self.omega < 1:
            raise ValueError(f"omega must be >= 1, got {self.omega}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


def _normalize(coords: np.ndarray) -> np.ndarray:
    """Shift to the origin and scale the longer bounding-box side to 1.

    Uniform scaling keeps relative distances, so tours transfer back."""
    lo = coords.min(axis=0)
    span = float((coords - lo).max())
    if span == 0.0:
        return coords - lo
    return (coords - lo) / span


def decompose(
    G: TspInstance, cfg: SearchConfig, rng: np.random.Generator
) -> tuple[list[Subgraph], Occurrence]:
    """Cover G with subgraphs until every node is in at least omega of them.

    Each round centers on the least covered node (ties: lowest index) and
    takes its subgraph_size - 1 nearest neighbors.  Runs at least once, so
    subgraph_size = n yields a single whole-graph window.
    """
    size = cfg.subgraph_size
    if size < 4:
        raise ValueError(f"subgraph_size must be >= 4, got {size}")
    if size > G.n:
        raise ValueError(f"subgraph_size {size} exceeds instance size {G.n}")

    diff = G.coords[:, None, :] - G.coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])

    o_v = np.zeros(G.n, dtype=np.int64)
    ext_edges = [tuple(e) for e in G.edges.tolist()]
    ext_rank = {e: i for i, e in enumerate(ext_edges)}
    counts = [0] * len(ext_edges)
    subs: list[Subgraph] = []

    k_local = min(cfg.k, size - 1)
    while True:
        center = int(np.argmin(o_v))
        nearest = np.argsort(dist[center], kind="stable")[:size]
        nodes = np.sort(nearest).astype(np.int64)
        o_v[nodes] += 1

        local = build_tsp_instance(_normalize(G.coords[nodes]), k=k_local)
        edge_map = np.empty(local.num_variables, dtype=np.int64)
        for e, (a, b) in enumerate(local.edges):
            u, v = int(nodes[a]), int(nodes[b])
            key = (u, v) if u < v else (v, u)
            gidx = ext_rank.get(key)
            if gidx is None:
                gidx = len(ext_edges)
                ext_rank[key] = gidx
                ext_edges.append(key)
                counts.append(0)
            counts[gidx] += 1
            edge_map[e] = gidx
        subs.append(Subgraph(nodes=nodes, local=local, edge_map=edge_map))
        if int(o_v.min()) >= cfg.omega:
            break

    occ = Occurrence(
        o_v=o_v,
        o_ij=np.array(counts, dtype=np.int64),
        edges=np.array(ext_edges, dtype=np.int64).reshape(-1, 2),
        base_vars=G.num_variables,
        omega=cfg.omega,
    )
    return subs, occ


def merge_heatmaps(
    subheatmaps: list[Heatmap], maps: list[Subgraph], occ: Occurrence
) -> Heatmap:
    """Average local scores per extended global edge.

    H_ij is the mean of the local scores over the subgraphs containing
    edge ij (division by o_ij); uncovered edges score 0.
    """
    if len(subheatmaps) != len(maps):
        raise ConsistencyError(
            f"{len(subheatmaps)} heatmaps for {len(maps)} subgraphs"
        )
    recount = np.zeros_like(occ.o_ij)
    for sg in maps:
        if sg.edge_map.max(initial=-1) >= occ.o_ij.shape[0]:
            raise ConsistencyError("edge_map points outside the occurrence table")
        np.add.at(recount, sg.edge_map, 1)
    if not np.array_equal(recount, occ.o_ij):
        raise ConsistencyError("occurrence counts do not match the subgraph maps")

    total = np.zeros(occ.o_ij.shape[0])
    for h, sg in zip(subheatmaps, maps):
        if h.scores.shape[0] != sg.edge_map.shape[0]:
            raise ConsistencyError("heatmap length does not match its edge map")
        np.add.at(total, sg.edge_map, h.scores)
    scores = np.divide(
        total,
        occ.o_ij,
        out=np.zeros_like(total),
        where=occ.o_ij > 0,
    )
    return Heatmap(scores=scores)


def multi_modal_search(
    G: TspInstance,
    denoiser,
    cfg: SearchConfig,
    rng: np.random.Generator,
) -> tuple[Tour, np.ndarray]:
    """Best tour over n_trials random merge combinations.

    Per subgraph, q heatmaps are sampled with independent noise off child
    rng streams; each trial picks one heatmap per subgraph uniformly,
    merges, greedy-decodes, refines with 2-opt, and records the length.
    Returns the shortest tour (ties: earliest trial) and the length trace.
    """
    subs, occ = decompose(G, cfg, rng)
    children = rng.spawn(len(subs) + 1)
    pools: list[list[Heatmap]] = []
    for sg, child in zip(subs, children):
        X_d = degraded_solution(sg.local, seed=0)
        pools.append(
            [sample_heatmap(denoiser, sg.local, X_d, cfg.sampler, child)
             for _ in range(cfg.q)]
        )

    G_ext = replace_edges(G, occ.edges)
    trial_rng = children[-1]
    best: Tour | None = None
    best_cost = np.inf
    trace = np.empty(cfg.n_trials)
    for trial in range(cfg.n_trials):
        picks = trial_rng.integers(0, cfg.q, size=len(subs))
        merged = merge_heatmaps(
            [pools[i][picks[i]] for i in range(len(subs))], subs, occ
        )
        tour = two_opt(G_ext, greedy_decode_tsp(G_ext, merged))
        cost = tour_length(G_ext, tour)
        trace[trial] = cost
        if cost < best_cost:
            best, best_cost = tour, cost
    return best, trace
