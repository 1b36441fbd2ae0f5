"""Neural and classical solvers for the Euclidean travelling salesman problem."""
from ._accel import backend
from .baselines import (SolveResult, brute_force_optimal, greedy_edge, held_karp,
                        nearest_neighbor, two_opt)
from .core import (Tour, TspInstance, build_instance, canonical_order, make_rng, make_tour,
                   parse_tsplib, random_instance, read_tsplib, serialize_tsplib, tour_length,
                   validate_order, write_tsplib)
from .hopfield import HopfieldParams, run_hopfield
from .relevance import RelevanceConfig, TrainingTrace, decode_cycle, train_relevance

__version__ = "0.1.0"

__all__ = [
    "backend", "SolveResult", "brute_force_optimal", "greedy_edge", "held_karp",
    "nearest_neighbor", "two_opt", "Tour", "TspInstance", "build_instance", "canonical_order",
    "make_rng", "make_tour", "parse_tsplib", "random_instance", "read_tsplib",
    "serialize_tsplib", "tour_length", "validate_order", "write_tsplib", "HopfieldParams",
    "run_hopfield", "RelevanceConfig", "TrainingTrace", "decode_cycle", "train_relevance",
]
