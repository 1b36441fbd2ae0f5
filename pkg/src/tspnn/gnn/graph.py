"""Graph samples for edge classification and the two dataset generators.

Node features are ``(x, y, is_source, is_target)``; TSP samples have no
endpoints, so their last two columns are zero. The single edge feature is the
Euclidean edge length.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..baselines import HELD_KARP_MAX_N, held_karp
from ..core import make_rng, pairwise_distances, random_instance
from ..errors import ShapeError, TooLargeForHeldKarp

NODE_FEATURES = 4
EDGE_FEATURES = 1
RADIUS_MULT = 1.0


@dataclass(frozen=True, eq=False)
class GraphSample:
    n: int
    edges: np.ndarray  # (E, 2), i < j, lexicographically sorted
    node_features: np.ndarray
    edge_features: np.ndarray
    node_labels: np.ndarray
    edge_labels: np.ndarray
    task: str = "shortest_path"

    def __post_init__(self):
        e = self.edges
        if e.ndim != 2 or (len(e) and e.shape[1] != 2):
            raise ShapeError("edges must be an (E, 2) array")
        if len(e) and np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        if len({(int(a), int(b)) for a, b in np.sort(e, axis=1)}) != len(e):
            raise ValueError("duplicate edges")
        if self.node_features.shape[0] != self.n or len(self.node_labels) != self.n:
            raise ShapeError("node arrays must have one row per node")
        if self.edge_features.shape[0] != len(e) or len(self.edge_labels) != len(e):
            raise ShapeError("edge arrays must have one row per edge")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def permuted(self, perm) -> "GraphSample":
        """Relabel nodes so that old node ``v`` becomes ``perm[v]``; edge rows keep their order."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        return GraphSample(self.n, perm[self.edges], self.node_features[inv],
                           self.edge_features, self.node_labels[inv], self.edge_labels, self.task)


def _connected(n, edges) -> bool:
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def dijkstra_path(n, edges, weights, source, target):
    """Shortest source-target path as a node list.

    Equal-distance relaxations keep the lower-index predecessor.
    """
    adj = [[] for _ in range(n)]
    for (a, b), w in zip(edges, weights):
        adj[a].append((b, w))
        adj[b].append((a, w))
    dist = [math.inf] * n
    pred = [-1] * n
    done = [False] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for w, c in adj[v]:
            nd = d + c
            if nd < dist[w] or (nd == dist[w] and v < pred[w] and not done[w]):
                dist[w] = nd
                pred[w] = v
                heapq.heappush(heap, (nd, w))
    path = [target]
    while path[-1] != source:
        path.append(pred[path[-1]])
    return path[::-1]


def _hops(n, edges, source):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    hop = [-1] * n
    hop[source] = 0
    frontier = [source]
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj[v]:
                if hop[w] < 0:
                    hop[w] = hop[v] + 1
                    nxt.append(w)
        frontier = nxt
    return hop


def random_geometric_graph(n, rng, radius_mult=RADIUS_MULT):
    """Points on the unit square joined when closer than
    ``radius_mult * sqrt(ln n / (pi n))``, redrawn until connected."""
    r = radius_mult * math.sqrt(math.log(n) / (math.pi * n))
    while True:
        pts = rng.random((n, 2))
        d = pairwise_distances(pts)
        iu, ju = np.triu_indices(n, k=1)
        keep = d[iu, ju] <= r
        edges = np.stack([iu[keep], ju[keep]], axis=1)
        if _connected(n, edges):
            return pts, edges, d[edges[:, 0], edges[:, 1]]


def shortest_path_sample(n, rng, radius_mult=RADIUS_MULT) -> GraphSample:
    while True:
        pts, edges, w = random_geometric_graph(n, rng, radius_mult)
        s = int(rng.integers(n))
        hop = _hops(n, edges, s)
        far = [v for v in range(n) if hop[v] >= 2]
        if far:
            t = int(far[rng.integers(len(far))])
            break
    path = dijkstra_path(n, edges, w, s, t)
    on_path = {tuple(sorted(e)) for e in zip(path[:-1], path[1:])}
    nf = np.zeros((n, NODE_FEATURES))
    nf[:, :2] = pts
    nf[s, 2] = 1.0
    nf[t, 3] = 1.0
    node_labels = np.zeros(n)
    node_labels[path] = 1.0
    edge_labels = np.array([1.0 if (int(a), int(b)) in on_path else 0.0 for a, b in edges])
    return GraphSample(n, edges, nf, w[:, None], node_labels, edge_labels, "shortest_path")


def tsp_sample(n, rng) -> GraphSample:
    if n > HELD_KARP_MAX_N:
        raise TooLargeForHeldKarp(f"n={n} exceeds Held-Karp limit {HELD_KARP_MAX_N}")
    inst = random_instance(n, rng)
    tour = held_karp(inst).tour
    iu, ju = np.triu_indices(n, k=1)
    edges = np.stack([iu, ju], axis=1)
    on_tour = set(tour.edges())
    nf = np.zeros((n, NODE_FEATURES))
    nf[:, :2] = inst.coords
    edge_labels = np.array([1.0 if (int(a), int(b)) in on_tour else 0.0 for a, b in edges])
    return GraphSample(n, edges, nf, inst.dist[iu, ju][:, None], np.ones(n), edge_labels, "tsp_edges")


def _sizes(count, n_range, rng):
    lo, hi = n_range
    if count < 1:
        raise ValueError("count must be >= 1")
    if lo < 3 or hi < lo:
        raise ValueError(f"bad n_range {n_range}")
    return [int(v) for v in rng.integers(lo, hi + 1, size=count)]


def make_shortest_path_dataset(count, n_range=(8, 16), seed=0, radius_mult=RADIUS_MULT):
    rng = make_rng(seed)
    return [shortest_path_sample(n, rng, radius_mult) for n in _sizes(count, n_range, rng)]


def make_tsp_dataset(count, n_range=(8, 16), seed=0):
    if n_range[1] > HELD_KARP_MAX_N:
        raise TooLargeForHeldKarp(f"n up to {n_range[1]} exceeds Held-Karp limit {HELD_KARP_MAX_N}")
    rng = make_rng(seed)
    return [tsp_sample(n, rng) for n in _sizes(count, n_range, rng)]


def split(dataset, train_fraction=0.8):
    """First 80% train, rest test (dataset order is already random)."""
    k = int(round(train_fraction * len(dataset)))
    return dataset[:k], dataset[k:]


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Disjoint union of samples with the index structures message passing needs.

    Directed edges (both orientations of every undirected edge) are sorted by
    destination so per-node softmax reductions can use ``reduceat``.
    """

    num_nodes: int
    node_features: np.ndarray
    edge_features: np.ndarray
    edges: np.ndarray  # undirected, global node ids
    node_labels: np.ndarray
    edge_labels: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    seg_nodes: np.ndarray  # nodes with at least one incoming edge
    seg_starts: np.ndarray
    to_dst: sp.csr_matrix  # (N, E_dir): sums directed-edge rows into their destination
    to_src: sp.csr_matrix
    node_graph: np.ndarray
    edge_graph: np.ndarray
    num_graphs: int

    @classmethod
    def from_samples(cls, samples) -> "GraphBatch":
        offs = np.cumsum([0] + [s.n for s in samples])
        N = int(offs[-1])
        edges = np.concatenate([s.edges + o for s, o in zip(samples, offs)]).astype(np.int64).reshape(-1, 2)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((src, dst))
        src, dst = src[order], dst[order]
        seg_nodes, seg_starts = np.unique(dst, return_index=True)
        Ed = len(src)
        ones = np.ones(Ed)
        to_dst = sp.csr_matrix((ones, (dst, np.arange(Ed))), shape=(N, Ed))
        to_src = sp.csr_matrix((ones, (src, np.arange(Ed))), shape=(N, Ed))
        node_graph = np.repeat(np.arange(len(samples)), [s.n for s in samples])
        edge_graph = np.repeat(np.arange(len(samples)), [s.num_edges for s in samples])
        return cls(N,
                   np.concatenate([s.node_features for s in samples]),
                   np.concatenate([s.edge_features for s in samples]).reshape(-1, EDGE_FEATURES),
                   edges,
                   np.concatenate([s.node_labels for s in samples]),
                   np.concatenate([s.edge_labels for s in samples]),
                   src, dst, seg_nodes, seg_starts, to_dst, to_src,
                   node_graph, edge_graph, len(samples))

    def with_node_features(self, nf) -> "GraphBatch":
        from dataclasses import replace
        return replace(self, node_features=nf)
