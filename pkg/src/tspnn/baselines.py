"""Exact oracles and classical construction/improvement heuristics."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Tour, TspInstance, make_tour
from .errors import IndexOutOfRange, TooLargeForBruteForce, TooLargeForHeldKarp

BRUTE_FORCE_MAX_N = 11
HELD_KARP_MAX_N = 18
EXACT_ALGORITHMS = frozenset({"brute_force", "held_karp"})


@dataclass(frozen=True)
class SolveResult:
    tour: Tour
    algorithm: str
    elapsed: float  # wall time, milliseconds
    optimal_flag: bool = False

    def __post_init__(self):
        if self.optimal_flag and self.algorithm not in EXACT_ALGORITHMS:
            raise ValueError(f"{self.algorithm} cannot claim optimality")

    @property
    def length(self) -> float:
        return self.tour.length


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


def _trivial_order(inst: TspInstance):
    # n == 3 has a single cycle; the kernels assume n >= 4
    return np.arange(inst.n)


def brute_force_optimal(inst: TspInstance) -> SolveResult:
    """Enumerate all (n-1)!/2 distinct tours; node 0 first, order[1] < order[-1]."""
    if inst.n > BRUTE_FORCE_MAX_N:
        raise TooLargeForBruteForce(f"n={inst.n} exceeds brute-force limit {BRUTE_FORCE_MAX_N}")
    t0 = time.perf_counter()
    if inst.n == 3:
        order = _trivial_order(inst)
    else:
        _, order = kernels.brute_force(inst.dist)
    tour = make_tour(inst, order).canonical()
    return SolveResult(tour, "brute_force", _ms(t0), True)


def held_karp(inst: TspInstance) -> SolveResult:
    """Exact optimum by subset dynamic programming, O(2^n n^2) time."""
    if inst.n > HELD_KARP_MAX_N:
        raise TooLargeForHeldKarp(f"n={inst.n} exceeds Held-Karp limit {HELD_KARP_MAX_N}")
    t0 = time.perf_counter()
    if inst.n == 3:
        order = _trivial_order(inst)
    else:
        _, order = kernels.held_karp(inst.dist)
    tour = make_tour(inst, order).canonical()
    return SolveResult(tour, "held_karp", _ms(t0), True)


def nearest_neighbor(inst: TspInstance, start: int = 0) -> SolveResult:
    if not 0 <= start < inst.n:
        raise IndexOutOfRange(f"start {start} not in [0, {inst.n})")
    t0 = time.perf_counter()
    n = inst.n
    visited = np.zeros(n, dtype=bool)
    order = [start]
    visited[start] = True
    cur = start
    for _ in range(n - 1):
        d = np.where(visited, np.inf, inst.dist[cur])
        cur = int(np.argmin(d))  # argmin returns the lowest index on ties
        visited[cur] = True
        order.append(cur)
    return SolveResult(make_tour(inst, order), "nearest_neighbor", _ms(t0))


def greedy_edge(inst: TspInstance) -> SolveResult:
    """Add edges shortest first, skipping any that would make a degree-3 node
    or close a cycle before all nodes are on one path."""
    t0 = time.perf_counter()
    n = inst.n
    iu, ju = np.triu_indices(n, k=1)
    # lexsort: primary key length, ties by (i, j)
    idx = np.lexsort((ju, iu, inst.dist[iu, ju]))
    degree = np.zeros(n, dtype=np.int64)
    parent = list(range(n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    adj = [[] for _ in range(n)]
    added = 0
    for q in idx:
        i, j = int(iu[q]), int(ju[q])
        if degree[i] == 2 or degree[j] == 2:
            continue
        ri, rj = find(i), find(j)
        if ri == rj and added < n - 1:
            continue
        parent[ri] = rj
        degree[i] += 1
        degree[j] += 1
        adj[i].append(j)
        adj[j].append(i)
        added += 1
        if added == n:
            break
    order = [0]
    prev, cur = -1, 0
    for _ in range(n - 1):
        nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
        order.append(nxt)
        prev, cur = cur, nxt
    return SolveResult(make_tour(inst, order), "greedy_edge", _ms(t0))


def two_opt(inst: TspInstance, initial) -> SolveResult:
    """First-improvement 2-opt from ``initial`` (a Tour or node sequence)."""
    order = initial.order if isinstance(initial, Tour) else initial
    start = make_tour(inst, order)  # validates
    t0 = time.perf_counter()
    out = kernels.two_opt(np.asarray(start.order, dtype=np.int64), inst.dist)
    return SolveResult(make_tour(inst, out), "two_opt", _ms(t0))
