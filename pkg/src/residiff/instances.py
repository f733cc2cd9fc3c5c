"""Problem instances, random generators, and solution encodings.

TSP instances live on the unit square with a sparsified edge list that
doubles as the variable index space; MIS instances are undirected graphs
whose variable space is the node set.  Solutions are signed vectors over
the variable space (+1 = selected), so heatmaps h = 0.5(x + 1) map back
to scores directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DISTRIBUTIONS = ("uniform", "normal", "cluster")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(eq=False)
class TspInstance:
    """Euclidean TSP instance over the unit square.

    ``edges`` is the ordered list of undirected node pairs (u < v, sorted
    lexicographically) that defines the variable index space.  ``scale``
    maps unit-square lengths back to original units for parsed instances.
    """

    n: int
    coords: np.ndarray
    edges: np.ndarray
    k: int
    scale: float = 1.0
    _edge_rank: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.coords = _frozen(np.asarray(self.coords, dtype=np.float64))
        self.edges = _frozen(np.asarray(self.edges, dtype=np.int64))
        if self.coords.shape != (self.n, 2):
            raise ValueError(f"coords shape {self.coords.shape} != ({self.n}, 2)")
        if self.edges.ndim != 2 or self.edges.shape[1] != 2:
            raise ValueError("edges must be an (N, 2) array")

    @property
    def num_variables(self) -> int:
        return self.edges.shape[0]

    def edge_index(self, u: int, v: int) -> int:
        """Variable index of the undirected edge (u, v); -1 when absent."""
        if self._edge_rank is None:
            keys = self.edges[:, 0] * self.n + self.edges[:, 1]
            object.__setattr__(
                self, "_edge_rank", {int(k): i for i, k in enumerate(keys)}
            )
        a, b = (u, v) if u < v else (v, u)
        return self._edge_rank.get(a * self.n + b, -1)

    def edge_lengths(self) -> np.ndarray:
        d = self.coords[self.edges[:, 0]] - self.coords[self.edges[:, 1]]
        return np.hypot(d[:, 0], d[:, 1])


@dataclass(eq=False)
class MisInstance:
    """Undirected graph for maximum independent set, CSR adjacency."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        self.indptr = _frozen(np.asarray(self.indptr, dtype=np.int64))
        self.indices = _frozen(np.asarray(self.indices, dtype=np.int64))
        self.edges = _frozen(np.asarray(self.edges, dtype=np.int64))
        if self.indptr.shape != (self.n + 1,):
            raise ValueError("indptr must have length n + 1")

    @property
    def num_variables(self) -> int:
        return self.n

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)


@dataclass(eq=False)
class SolutionVector:
    """Signed selection vector over the variable space: every entry ±1."""

    values: np.ndarray

    def __post_init__(self):
        self.values = _frozen(np.asarray(self.values, dtype=np.float64))
        if self.values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not np.all(np.abs(self.values) == 1.0):
            raise ValueError("solution entries must be exactly -1 or +1")


@dataclass(eq=False)
class Tour:
    """Visiting order of a TSP solution: a permutation of {0..n-1}."""

    order: np.ndarray

    def __post_init__(self):
        self.order = _frozen(np.asarray(self.order, dtype=np.int64))
        n = self.order.shape[0]
        if not np.array_equal(np.sort(self.order), np.arange(n)):
            raise ValueError("tour order must be a permutation of 0..n-1")


def _canonical_edges(pairs: np.ndarray) -> np.ndarray:
    """Sort endpoints within pairs, drop duplicates, sort lexicographically."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)
    keep = lo != hi
    stacked = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    return stacked


def knn_edges(coords: np.ndarray, k: int) -> np.ndarray:
    """Symmetrized k-nearest-neighbor edge pairs (unsorted endpoints ok)."""
    n = coords.shape[0]
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    return np.stack([src, nearest.ravel().astype(np.int64)], axis=1)


def _cycle_pairs(n: int) -> np.ndarray:
    nodes = np.arange(n, dtype=np.int64)
    return np.stack([nodes, np.roll(nodes, -1)], axis=1)


def build_tsp_instance(
    coords: np.ndarray,
    k: int,
    extra_tours: tuple = (),
    scale: float = 1.0,
) -> TspInstance:
    """Assemble an instance from coordinates and a sparsification degree.

    The edge list is the k-NN sparsification plus the sequential cycle
    0-1-...-(n-1)-0, so the degraded solution is always representable, plus
    the edges of any ``extra_tours`` (used so labels stay representable).
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    parts = [knn_edges(coords, k), _cycle_pairs(n)]
    for t in extra_tours:
        order = t.order if isinstance(t, Tour) else np.asarray(t, dtype=np.int64)
        parts.append(np.stack([order, np.roll(order, -1)], axis=1))
    edges = _canonical_edges(np.concatenate(parts, axis=0))
    return TspInstance(n=n, coords=coords, edges=edges, k=k, scale=scale)


def generate_tsp(n: int, distribution: str, seed: int, k: int) -> TspInstance:
    """Random TSP instance; deterministic given the seed.

    uniform: i.i.d. on the unit square.  normal: mean 0.5, variance 0.1 per
    axis, clamped into the square.  cluster: 3 centers uniform in
    [0.2, 0.8]^2 with Gaussian sigma=0.05 scatter, clamped.
    """
    if n < 4:
        raise ValueError(f"n must be >= 4, got {n}")
    if k >= n:
        raise ValueError(f"k must be < n, got k={k}, n={n}")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        coords = rng.random((n, 2))
    elif distribution == "normal":
        coords = 0.5 + np.sqrt(0.1) * rng.standard_normal((n, 2))
        coords = np.clip(coords, 0.0, 1.0)
    else:
        centers = 0.2 + 0.6 * rng.random((3, 2))
        which = rng.integers(0, 3, size=n)
        coords = centers[which] + 0.05 * rng.standard_normal((n, 2))
        coords = np.clip(coords, 0.0, 1.0)
    return build_tsp_instance(coords, k)


def generate_er(n: int, p: float, seed: int) -> MisInstance:
    """Erdos-Renyi graph: each unordered pair is an edge with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, k=1)
    mask = rng.random(iu.shape[0]) < p
    edges = np.stack([iu[mask], iv[mask]], axis=1).astype(np.int64)
    return build_mis_instance(n, edges)


def build_mis_instance(n: int, edges: np.ndarray) -> MisInstance:
    edges = _canonical_edges(edges) if len(edges) else np.empty((0, 2), np.int64)
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    counts = np.bincount(both[:, 0], minlength=n) if both.size else np.zeros(n, int)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(both.shape[0], dtype=np.int64)
    if both.size:
        order = np.lexsort((both[:, 1], both[:, 0]))
        indices[:] = both[order, 1]
    return MisInstance(n=n, indptr=indptr, indices=indices, edges=edges)


def tour_length(inst: TspInstance, tour: Tour) -> float:
    """Total Euclidean length of the closed cycle in unit-square units."""
    order = tour.order if isinstance(tour, Tour) else Tour(tour).order
    if order.shape[0] != inst.n:
        raise ValueError("tour does not cover the instance")
    pts = inst.coords[order]
    d = pts - np.roll(pts, -1, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def tour_to_solution(inst: TspInstance, tour: Tour) -> SolutionVector:
    """Encode a tour as ±1 over the edge list; raises if an edge is absent."""
    values = np.full(inst.num_variables, -1.0)
    order = tour.order
    for i in range(inst.n):
        u, v = int(order[i]), int(order[(i + 1) % inst.n])
        idx = inst.edge_index(u, v)
        if idx < 0:
            raise ValueError(f"tour edge ({u}, {v}) not in the instance edge list")
        values[idx] = 1.0
    return SolutionVector(values)


def solution_to_tour(inst: TspInstance, sol: SolutionVector) -> Tour:
    """Decode a ±1 edge vector that forms a single Hamiltonian cycle."""
    chosen = inst.edges[sol.values > 0]
    if chosen.shape[0] != inst.n:
        raise ValueError("solution does not select exactly n edges")
    adj = np.full((inst.n, 2), -1, dtype=np.int64)
    deg = np.zeros(inst.n, dtype=np.int64)
    for u, v in chosen:
        if deg[u] > 1 or deg[v] > 1:
            raise ValueError("solution edge degrees exceed 2")
        adj[u, deg[u]] = v
        adj[v, deg[v]] = u
        deg[u] += 1
        deg[v] += 1
    order = np.empty(inst.n, dtype=np.int64)
    order[0], prev, cur = 0, 0, int(adj[0, 0])
    for i in range(1, inst.n):
        if cur == 0:
            raise ValueError("solution edges form more than one cycle")
        order[i] = cur
        nxt = int(adj[cur, 0]) if adj[cur, 0] != prev else int(adj[cur, 1])
        prev, cur = cur, nxt
    return Tour(order)


def degraded_solution(inst, seed: int) -> SolutionVector:
    """Cheap feasible anchor solution for the diffusion endpoint.

    TSP: the sequential cycle 0-1-...-(n-1)-0 (its edges are always in the
    edge list by construction).  MIS: each node selected with probability
    0.5, then repaired to independence by deselecting the lower-indexed
    endpoint of every conflicting edge.
    """
    if isinstance(inst, TspInstance):
        return tour_to_solution(inst, Tour(np.arange(inst.n)))
    rng = np.random.default_rng(seed)
    values = np.where(rng.random(inst.n) < 0.5, 1.0, -1.0)
    for u, v in inst.edges:
        if values[u] > 0 and values[v] > 0:
            values[u] = -1.0
    return SolutionVector(values)


def replace_edges(inst: TspInstance, edges: np.ndarray) -> TspInstance:
    """Same coordinates, different variable space (already canonical)."""
    return TspInstance(
        n=inst.n, coords=inst.coords, edges=edges, k=inst.k, scale=inst.scale
    )


def selection_size(sol: SolutionVector) -> int:
    return int(np.sum(sol.values > 0))
