"""Hopfield-Tank continuous relaxation of the TSP.

The network state is a city-by-position activation matrix ``X`` (row ``x`` is
a city, column ``i`` a tour position) driven by internal potentials ``U``
through ``X = sigmoid(U / u0)``. The energy penalises more than one active
position per city (A), more than one active city per position (B), a total
activation different from ``n`` (C) and the length of the encoded tour (D).
Position indices wrap around, so the tour closes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .baselines import SolveResult
from .core import Tour, TspInstance, make_rng, make_tour
from .errors import DecodeError, InvalidConvergence, NumericalDivergence, ShapeError


@dataclass(frozen=True)
class HopfieldParams:
    A: float = 500.0
    B: float = 500.0
    C: float = 200.0
    D: float = 300.0
    u0: float = 0.02
    dt: float = 1e-5
    tau: float = 1.0
    max_steps: int = 20_000
    tol: float = 1e-6

    def __post_init__(self):
        if min(self.A, self.B, self.C, self.D) < 0:
            raise ValueError("penalty weights must be non-negative")
        if self.u0 <= 0 or self.tau <= 0:
            raise ValueError("u0 and tau must be positive")
        if self.dt < 0:
            raise ValueError("dt must be non-negative")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True, eq=False)
class HopfieldState:
    U: np.ndarray
    X: np.ndarray = field(repr=False)

    @classmethod
    def from_potentials(cls, U, u0: float) -> "HopfieldState":
        U = np.asarray(U, dtype=np.float64)
        return cls(U, expit(U / u0))

    @classmethod
    def from_activations(cls, X, u0: float = 1.0) -> "HopfieldState":
        """State holding ``X`` exactly; ``U`` is its logit (infinite where X is 0 or 1)."""
        X = np.asarray(X, dtype=np.float64)
        with np.errstate(divide="ignore"):
            U = u0 * (np.log(X) - np.log1p(-X))
        return cls(U, X)


def _check(state, inst):
    n = inst.n
    if state.X.shape != (n, n) or state.U.shape != (n, n):
        raise ShapeError(f"state must be {n}x{n}, got X{state.X.shape} U{state.U.shape}")


def _neighbor_positions(X):
    # S[y, i] = X[y, i + 1] + X[y, i - 1], positions cyclic
    return np.roll(X, -1, axis=1) + np.roll(X, 1, axis=1)


def hopfield_energy(state: HopfieldState, inst: TspInstance, p: HopfieldParams) -> float:
    _check(state, inst)
    X = state.X
    n = inst.n
    sq = X * X
    rows = X.sum(axis=1)
    cols = X.sum(axis=0)
    e_a = 0.5 * p.A * (np.sum(rows * rows) - sq.sum())
    e_b = 0.5 * p.B * (np.sum(cols * cols) - sq.sum())
    e_c = 0.5 * p.C * (X.sum() - n) ** 2
    # dist has a zero diagonal, so y == x contributes nothing
    e_d = 0.5 * p.D * np.sum(X * (inst.dist @ _neighbor_positions(X)))
    return float(e_a + e_b + e_c + e_d)


def energy_gradient(state: HopfieldState, inst: TspInstance, p: HopfieldParams) -> np.ndarray:
    """Closed-form dE/dX."""
    _check(state, inst)
    X = state.X
    g = p.A * (X.sum(axis=1, keepdims=True) - X)
    g += p.B * (X.sum(axis=0, keepdims=True) - X)
    g += p.C * (X.sum() - inst.n)
    g += p.D * (inst.dist @ _neighbor_positions(X))
    return g


def hopfield_step(state: HopfieldState, inst: TspInstance, p: HopfieldParams) -> HopfieldState:
    """One explicit Euler step of dU/dt = -dE/dX - U/tau."""
    if not (np.all(np.isfinite(state.U)) and np.all(np.isfinite(state.X))):
        raise NumericalDivergence("non-finite values in Hopfield state")
    g = energy_gradient(state, inst, p)
    U = state.U + p.dt * (-g - state.U / p.tau)
    if not np.all(np.isfinite(U)):
        raise NumericalDivergence("Hopfield potentials diverged")
    return HopfieldState.from_potentials(U, p.u0)


def decode_assignment(X) -> Tour:
    """Pick the most active city for every position.

    Returns a Tour with length 0.0 (no instance at hand); use
    :func:`tspnn.core.make_tour` to score it. Raises DecodeError when a city
    wins more than one position.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ShapeError(f"X must be square, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DecodeError("NonFinite", X)
    order = np.argmax(X, axis=0)
    if len(np.unique(order)) != len(order):
        raise DecodeError("NotPermutation", X)
    return Tour(tuple(int(v) for v in order), 0.0)


def initial_state(inst: TspInstance, p: HopfieldParams, seed) -> HopfieldState:
    """Uniform bias putting every activation at 1/n (so sum X = n), plus
    noise uniform in [-0.03, 0.03] * u0."""
    rng = make_rng(seed)
    n = inst.n
    bias = p.u0 * np.log(1.0 / (n - 1))
    noise = rng.uniform(-0.03, 0.03, size=(n, n)) * p.u0
    return HopfieldState.from_potentials(bias + noise, p.u0)


def run_hopfield(inst: TspInstance, p: HopfieldParams | None = None, seed=0,
                 energies: list | None = None) -> SolveResult:
    """Integrate the network until it settles or ``max_steps`` runs out.

    If ``energies`` is a list, the energy of the initial state and after every
    step is appended to it. Raises InvalidConvergence when the final state
    does not decode to a tour.
    """
    p = p or HopfieldParams()
    t0 = time.perf_counter()
    state = initial_state(inst, p, seed)
    if energies is not None:
        energies.append(hopfield_energy(state, inst, p))
    steps = 0
    for steps in range(1, p.max_steps + 1):
        new = hopfield_step(state, inst, p)
        delta = np.max(np.abs(new.X - state.X))
        state = new
        if energies is not None:
            energies.append(hopfield_energy(state, inst, p))
        if delta < p.tol:
            break
    try:
        order = decode_assignment(state.X).order
    except DecodeError:
        raise InvalidConvergence(state.X, steps) from None
    tour = make_tour(inst, order)
    return SolveResult(tour, "hopfield", (time.perf_counter() - t0) * 1000.0)
