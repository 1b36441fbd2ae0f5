"""Edge-relevance TSP solver: gradient descent plus genetic restarts.

Each population member owns an ``n x n`` real matrix ``R``; ``R[i, j]`` is the
relevance of the directed edge i -> j, i.e. the unnormalised log-preference
for j being the tour successor of i. Gradient descent works on a smooth
surrogate of the tour length,

    L(R) = sum_ij P_ij d_ij + beta * sum_j (sum_i P_ij - 1)^2,

with ``P`` the row-wise softmax of ``R`` over off-diagonal entries. The
decoded tour length E (greedy successor assignment followed by subtour
patching) is the fitness that drives best-tracking and the genetic
operators: a member whose best E has not improved for ``stagnation`` epochs
is either mutated (Gaussian noise on a block of rows) or crossed with the
best parameters seen so far (a block of rows copied from them).
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .baselines import SolveResult
from .core import Tour, TspInstance, make_rng, make_tour
from .errors import InstanceTooSmall, InvalidCover, NumericalError, ShapeError, TrainingDiverged

EVENTS = ("none", "mutation", "crossover")
NONE, MUTATION, CROSSOVER = range(3)
TRACE_HEADER = ("epoch", "member", "surrogate_loss", "decoded_E", "event", "global_best_E")


@dataclass(frozen=True, eq=False)
class RelevanceModel:
    R: np.ndarray

    @property
    def n(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True, eq=False)
class PopulationMember:
    model: RelevanceModel
    best_decoded: Tour
    best_E: float
    stagnation: int = 0
    last_event: str = "none"


@dataclass(frozen=True)
class RelevanceConfig:
    population: int = 8
    learning_rate: float = 0.1
    beta: float | None = None  # None: twice the mean edge length
    stagnation: float = 25  # math.inf disables the genetic operators
    sigma: float = 1.0
    rho: float = 0.25
    epochs: int = 2000
    seed: int = 0
    init_std: float = 0.1
    mutation_prob: float = 0.5

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.beta is not None and self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.stagnation < 1:
            raise ValueError("stagnation window must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must be in (0, 1]")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    def beta_for(self, inst: TspInstance) -> float:
        if self.beta is not None:
            return float(self.beta)
        n = inst.n
        return 2.0 * float(inst.dist.sum()) / (n * (n - 1))


# -- differentiable part ----------------------------------------------------------

def successor_probabilities(R) -> np.ndarray:
    """Row softmax over off-diagonal entries; works on (n, n) or (M, n, n)."""
    R = np.asarray(R, dtype=np.float64)
    n = R.shape[-1]
    if n < 3:
        raise InstanceTooSmall(f"need n >= 3, got {n}")
    if R.shape[-2] != n:
        raise ShapeError(f"R must be square, got {R.shape}")
    mask = np.eye(n, dtype=bool)
    Z = np.where(mask, -np.inf, R)
    Z = Z - Z.max(axis=-1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=-1, keepdims=True)


def surrogate_loss(R, inst: TspInstance, beta: float):
    """Loss value(s) and gradient w.r.t. ``R``.

    ``R`` may be a single matrix or a stack of M matrices; for a stack the
    loss is an array of M values and each gradient slice belongs to its own
    member.
    """
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-2:] != (inst.n, inst.n):
        raise ShapeError(f"R must end in ({inst.n}, {inst.n}), got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NumericalError("non-finite relevance matrix")
    P = successor_probabilities(R)
    d = inst.dist
    col = P.sum(axis=-2) - 1.0  # (..., n)
    loss = np.sum(P * d, axis=(-2, -1)) + beta * np.sum(col * col, axis=-1)
    dP = d + 2.0 * beta * col[..., None, :]
    grad = P * (dP - np.sum(P * dP, axis=-1, keepdims=True))
    n = inst.n
    grad[..., np.arange(n), np.arange(n)] = 0.0
    if not np.all(np.isfinite(loss)):
        raise NumericalError("non-finite surrogate loss")
    return (float(loss) if np.ndim(loss) == 0 else loss), grad


# -- decoding ---------------------------------------------------------------------

def _as_succ(cycle_cover, n: int) -> np.ndarray:
    cc = list(cycle_cover) if not isinstance(cycle_cover, np.ndarray) else cycle_cover
    if len(cc) and not np.isscalar(cc[0]) and np.ndim(cc[0]) == 1:
        succ = np.full(n, -1, dtype=np.int64)
        for cyc in cc:
            cyc = [int(v) for v in cyc]
            if not cyc:
                raise InvalidCover("empty cycle")
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                if not 0 <= a < n or succ[a] >= 0:
                    raise InvalidCover(f"node {a} repeated or out of range")
                succ[a] = b
        if np.any(succ < 0):
            raise InvalidCover("cycles do not cover every node")
        return succ
    succ = np.asarray(cc)
    if succ.ndim != 1 or len(succ) != n or succ.dtype.kind not in "iu":
        raise InvalidCover(f"expected a successor array of {n} integers")
    succ = succ.astype(np.int64)
    if succ.min() < 0 or succ.max() >= n or len(np.unique(succ)) != n:
        raise InvalidCover("successor array is not a permutation")
    return succ


def patch_subtours(cycle_cover, inst: TspInstance) -> Tour:
    """Merge a cycle cover into one Hamiltonian cycle.

    ``cycle_cover`` is either a successor array (``succ[i]`` follows ``i``) or
    a list of node cycles. 1- and 2-cycles are allowed. While several cycles
    remain, the pair of edges from two different cycles whose 2-exchange is
    cheapest (both reconnection orientations tried) is relinked.
    """
    succ = _as_succ(cycle_cover, inst.n)
    merged = kernels.patch_subtours(succ, inst.dist)
    return make_tour(inst, kernels.succ_to_order(merged))


def decode_cycle(R, inst: TspInstance) -> Tour:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (inst.n, inst.n):
        raise ShapeError(f"R must be {inst.n}x{inst.n}, got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NumericalError("non-finite relevance matrix")
    succ = kernels.greedy_assignment(R)
    return patch_subtours(succ, inst)


# -- genetic operators ---------------------------------------------------------------

def _row_block(n: int, rho: float, rng) -> slice:
    k = min(n, math.ceil(rho * n))
    start = int(rng.integers(0, n - k + 1))
    return slice(start, start + k)


def mutate(member: PopulationMember, sigma: float, rho: float, rng) -> PopulationMember:
    """Add N(0, sigma^2) noise to a contiguous block of ceil(rho * n) rows."""
    R = member.model.R.copy()
    n = R.shape[0]
    rows = _row_block(n, rho, rng)
    R[rows] += rng.normal(0.0, sigma, size=R[rows].shape) if sigma > 0 else 0.0
    return replace(member, model=RelevanceModel(R), stagnation=0, last_event="mutation")


def crossover(member: PopulationMember, donor_best, rho: float, rng) -> PopulationMember:
    """Overwrite a contiguous block of ceil(rho * n) rows with the donor's rows."""
    donor = donor_best.model.R if isinstance(donor_best, PopulationMember) else np.asarray(donor_best)
    R = member.model.R.copy()
    if donor.shape != R.shape:
        raise ShapeError(f"donor shape {donor.shape} != member shape {R.shape}")
    rows = _row_block(R.shape[0], rho, rng)
    R[rows] = donor[rows]
    return replace(member, model=RelevanceModel(R), stagnation=0, last_event="crossover")


# -- training trace -------------------------------------------------------------------

@dataclass
class TrainingTrace:
    """One row per (epoch, member), stored column-wise."""

    epoch: np.ndarray
    member: np.ndarray
    surrogate_loss: np.ndarray
    decoded_E: np.ndarray
    event: np.ndarray  # codes into EVENTS
    global_best_E: np.ndarray
    snapshots: list = field(default_factory=list)  # (epoch, order) when the best improves

    @classmethod
    def allocate(cls, rows: int) -> "TrainingTrace":
        return cls(np.zeros(rows, np.int64), np.zeros(rows, np.int64), np.zeros(rows),
                   np.zeros(rows), np.zeros(rows, np.int8), np.zeros(rows))

    def truncate(self, rows: int) -> "TrainingTrace":
        return TrainingTrace(self.epoch[:rows], self.member[:rows], self.surrogate_loss[:rows],
                             self.decoded_E[:rows], self.event[:rows], self.global_best_E[:rows],
                             self.snapshots)

    def __len__(self):
        return len(self.epoch)

    def best_series(self) -> np.ndarray:
        """Global best E at the end of every epoch."""
        last = np.r_[self.epoch[1:] != self.epoch[:-1], True]
        return self.global_best_E[last]

    def event_count(self) -> int:
        return int(np.count_nonzero(self.event))

    def rows(self):
        for k in range(len(self)):
            yield (int(self.epoch[k]), int(self.member[k]), float(self.surrogate_loss[k]),
                   float(self.decoded_E[k]), EVENTS[self.event[k]], float(self.global_best_E[k]))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for e, m, loss, E, ev, best in self.rows():
                w.writerow((e, m, repr(loss), repr(E), ev, repr(best)))

    def write_snapshots(self, path) -> None:
        doc = {"version": 1,
               "snapshots": [{"epoch": int(e), "order": [int(v) for v in o]} for e, o in self.snapshots]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")


def read_trace_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["epoch"] = int(r["epoch"])
        r["member"] = int(r["member"])
        for k in ("surrogate_loss", "decoded_E", "global_best_E"):
            r[k] = float(r[k])
    return rows


# -- engine -------------------------------------------------------------------------------

def train_relevance(inst: TspInstance, cfg: RelevanceConfig | None = None):
    """Run the hybrid engine; returns ``(SolveResult, TrainingTrace)``.

    Epoch 0 records the decoded random initialisation. In every later epoch,
    members flagged as stagnant at the end of the previous epoch first receive
    their genetic event, then every member takes one gradient step and is
    decoded, so an event's effect on E shows up in the row that records it.
    """
    cfg = cfg or RelevanceConfig()
    t0 = time.perf_counter()
    rng = make_rng(cfg.seed)
    n, M = inst.n, cfg.population
    beta = cfg.beta_for(inst)
    dist = inst.dist

    Rs = rng.normal(0.0, cfg.init_std, size=(M, n, n))
    trace = TrainingTrace.allocate((cfg.epochs + 1) * M)
    best_E = np.full(M, np.inf)
    best_orders = np.zeros((M, n), dtype=np.int64)
    stagnation = np.zeros(M, dtype=np.int64)
    g_best = np.inf
    g_order = None
    g_R = None
    events = np.zeros(M, dtype=np.int8)
    row = 0

    for epoch in range(cfg.epochs + 1):
        events[:] = NONE
        if epoch > 0:
            for m in np.flatnonzero(stagnation >= cfg.stagnation):
                member = PopulationMember(RelevanceModel(Rs[m]), None, best_E[m], int(stagnation[m]))
                if rng.random() < cfg.mutation_prob:
                    member = mutate(member, cfg.sigma, cfg.rho, rng)
                    events[m] = MUTATION
                else:
                    member = crossover(member, g_R, cfg.rho, rng)
                    events[m] = CROSSOVER
                Rs[m] = member.model.R
                stagnation[m] = 0
        try:
            loss, grad = surrogate_loss(Rs, inst, beta)
            if epoch > 0:
                with np.errstate(over="ignore", invalid="ignore"):
                    Rs -= cfg.learning_rate * grad
                loss, _ = surrogate_loss(Rs, inst, beta)
        except NumericalError as exc:
            raise TrainingDiverged(f"epoch {epoch}: {exc}", trace.truncate(row)) from None
        orders, lengths = kernels.decode_batch(Rs, dist)

        improved = lengths < best_E - 1e-12
        best_E = np.where(improved, lengths, best_E)
        best_orders[improved] = orders[improved]
        stagnation = np.where(improved, 0, stagnation + 1)
        m_best = int(np.argmin(lengths))  # lowest member index on ties
        if lengths[m_best] < g_best - 1e-12:
            g_best = float(lengths[m_best])
            g_order = orders[m_best].copy()
            g_R = Rs[m_best].copy()
            trace.snapshots.append((epoch, g_order.tolist()))

        sl = slice(row, row + M)
        trace.epoch[sl] = epoch
        trace.member[sl] = np.arange(M)
        trace.surrogate_loss[sl] = loss
        trace.decoded_E[sl] = lengths
        trace.event[sl] = events
        trace.global_best_E[sl] = g_best
        row += M

    tour = make_tour(inst, g_order).canonical()
    result = SolveResult(tour, "relevance", (time.perf_counter() - t0) * 1000.0)
    return result, trace
