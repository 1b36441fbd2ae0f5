"""Command-line benchmark harness.

Commands::

    tspnn gen       --n 10 --count 5 --seed 1 --out instances/
    tspnn solve     --config run.json            (or --instance x.tsp --algo heldkarp)
    tspnn bench     --config suite.json --out bench.csv
    tspnn gnn-train --task shortest-path --seed 0 --out report.json

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 I/O error.
Elapsed wall-clock times appear only in fields named ``elapsed_ms``; every
other output byte is a function of the configuration and seed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import baselines, hopfield, relevance
from .core import make_rng, random_instance, read_tsplib, serialize_tsplib
from .errors import (ConfigError, InvalidConvergence, TooLargeForBruteForce, TooLargeForHeldKarp,
                     TspError)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
CONFIG_VERSION = 1
ALGORITHMS = ("brute", "heldkarp", "nn", "greedy", "2opt", "hopfield", "gnn", "relevance")
BENCH_HEADER = ("instance", "n", "algorithm", "length", "optimal", "gap_pct", "elapsed_ms", "seed")
GNN_TASKS = {"shortest-path": "shortest_path", "tsp-edges": "tsp_edges"}

RUN_KEYS = {"version", "algorithm", "instance", "seed", "params", "out", "trace_out", "snapshots_out"}
SUITE_KEYS = {"version", "instances", "generate", "algorithms", "seeds", "params", "out"}
GENERATE_KEYS = {"n", "count", "seed", "prefix"}
GNN_KEYS = {"version", "task", "count", "n_range", "seed", "train", "out", "params_out"}


class IoFailure(Exception):
    pass


# -- config handling ------------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def check_keys(doc: dict, allowed: set, what: str, require_version=True) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {', '.join(unknown)}")
    if require_version:
        if "version" not in doc:
            raise ConfigError(f"{what} config needs a 'version' field")
        if doc["version"] != CONFIG_VERSION:
            raise ConfigError(f"unsupported {what} config version {doc['version']!r}")


def _dataclass_from(cls, overrides: dict, what: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(overrides) - names)
    if unknown:
        raise ConfigError(f"unknown {what} parameters: {', '.join(unknown)}")
    try:
        return cls(**overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what} parameters: {exc}") from None


def _seed(value) -> int:
    try:
        s = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {value!r}") from None
    if not 0 <= s < 2**64:
        raise ConfigError("seed must fit in 64 unsigned bits")
    return s


def _read_instance(path):
    try:
        return read_tsplib(path)
    except OSError as exc:
        raise IoFailure(f"cannot read instance {path}: {exc}") from None


# -- solving -----------------------------------------------------------------------

def run_algorithm(algo: str, inst, seed: int = 0, params: dict | None = None):
    """Solve ``inst``; returns ``(SolveResult, TrainingTrace or None)``."""
    params = dict(params or {})
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    if algo == "brute":
        return baselines.brute_force_optimal(inst), None
    if algo == "heldkarp":
        return baselines.held_karp(inst), None
    if algo == "nn":
        start = params.pop("start", 0)
        if params:
            raise ConfigError(f"unknown nn parameters: {', '.join(sorted(params))}")
        return baselines.nearest_neighbor(inst, int(start)), None
    if algo == "greedy":
        if params:
            raise ConfigError(f"unknown greedy parameters: {', '.join(sorted(params))}")
        return baselines.greedy_edge(inst), None
    if algo == "2opt":
        init = params.pop("init", "nn")
        if params:
            raise ConfigError(f"unknown 2opt parameters: {', '.join(sorted(params))}")
        if init == "nn":
            start = baselines.nearest_neighbor(inst, 0)
        elif init == "greedy":
            start = baselines.greedy_edge(inst)
        else:
            raise ConfigError(f"2opt init must be 'nn' or 'greedy', got {init!r}")
        res = baselines.two_opt(inst, start.tour)
        return dataclasses.replace(res, elapsed=res.elapsed + start.elapsed), None
    if algo == "hopfield":
        p = _dataclass_from(hopfield.HopfieldParams, params, "hopfield")
        return hopfield.run_hopfield(inst, p, seed), None
    if algo == "relevance":
        cfg = _dataclass_from(relevance.RelevanceConfig, {**params, "seed": seed}, "relevance")
        return relevance.train_relevance(inst, cfg)
    return _gnn_solve(inst, params), None


def _gnn_solve(inst, params):
    """Score every edge with a trained model and decode the scores into a tour."""
    from .gnn.graph import GraphSample
    from .gnn.io import load_json, params_from_dict
    from .gnn.model import forward_edge_logits

    model = params.pop("model", None)
    if params:
        raise ConfigError(f"unknown gnn parameters: {', '.join(sorted(params))}")
    if model is None:
        raise ConfigError("algorithm gnn needs params.model (a gnn-train parameter file)")
    try:
        p = params_from_dict(load_json(model))
    except OSError as exc:
        raise IoFailure(f"cannot read model {model}: {exc}") from None
    t0 = time.perf_counter()
    n = inst.n
    iu, ju = np.triu_indices(n, k=1)
    nf = np.zeros((n, 4))
    nf[:, :2] = inst.coords
    sample = GraphSample(n, np.stack([iu, ju], axis=1), nf, inst.dist[iu, ju][:, None],
                         np.ones(n), np.zeros(len(iu)), "tsp_edges")
    logits = forward_edge_logits(sample, p)
    R = np.zeros((n, n))
    R[iu, ju] = logits
    R[ju, iu] = logits
    tour = relevance.decode_cycle(R, inst)
    return baselines.SolveResult(tour, "gnn", (time.perf_counter() - t0) * 1000.0)


def result_dict(inst, res, seed):
    return {
        "instance": inst.name,
        "n": inst.n,
        "algorithm": res.algorithm,
        "length": res.length,
        "tour": list(res.tour.order),
        "optimal": res.optimal_flag,
        "seed": seed,
        "elapsed_ms": res.elapsed,
    }


def cmd_gen(n: int, count: int, seed: int, out_dir, prefix: str = "rand") -> list:
    rng = make_rng(seed)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from None
    paths = []
    for k in range(count):
        inst = random_instance(n, rng, name=f"{prefix}_{n}_{k}")
        path = out / f"{prefix}_{n}_{k}.tsp"
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(serialize_tsplib(inst))
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from None
        paths.append(path)
    return paths


def cmd_solve(config: dict) -> dict:
    check_keys(config, RUN_KEYS, "run")
    for key in ("algorithm", "instance"):
        if key not in config:
            raise ConfigError(f"run config needs {key!r}")
    algo = config["algorithm"]
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    seed = _seed(config.get("seed", 0))
    params = config.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    inst = _read_instance(config["instance"])
    res, trace = run_algorithm(algo, inst, seed, params)
    try:
        if trace is not None and config.get("trace_out"):
            trace.write_csv(config["trace_out"])
        if trace is not None and config.get("snapshots_out"):
            trace.write_snapshots(config["snapshots_out"])
    except OSError as exc:
        raise IoFailure(f"cannot write trace: {exc}") from None
    doc = result_dict(inst, res, seed)
    if config.get("out"):
        _write_text(config["out"], json.dumps(doc, indent=1) + "\n")
    return doc


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


# -- benchmark ------------------------------------------------------------------------

def _suite_instances(suite):
    insts = []
    for path in suite.get("instances") or []:
        insts.append(_read_instance(path))
    gen = suite.get("generate")
    if gen:
        check_keys(gen, GENERATE_KEYS, "generate", require_version=False)
        ns = gen.get("n", [10])
        ns = ns if isinstance(ns, list) else [ns]
        rng = make_rng(_seed(gen.get("seed", 0)))
        prefix = gen.get("prefix", "rand")
        for n in ns:
            for k in range(int(gen.get("count", 1))):
                insts.append(random_instance(int(n), rng, name=f"{prefix}_{n}_{k}"))
    if not insts:
        raise ConfigError("suite lists no instances (use 'instances' or 'generate')")
    return insts


def bench_rows(suite: dict) -> list:
    """One row per (instance, algorithm, seed), sorted by (instance, algorithm, seed)."""
    check_keys(suite, SUITE_KEYS, "suite")
    algos = suite.get("algorithms") or []
    if not algos:
        raise ConfigError("suite needs a non-empty 'algorithms' list")
    for a in algos:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}")
    seeds = [_seed(s) for s in suite.get("seeds", [0])]
    params = suite.get("params") or {}
    unknown = sorted(set(params) - set(ALGORITHMS))
    if unknown:
        raise ConfigError(f"params for unknown algorithms: {', '.join(unknown)}")
    rows = []
    for inst in _suite_instances(suite):
        optimal = None
        if inst.n <= baselines.HELD_KARP_MAX_N:
            optimal = baselines.held_karp(inst).length
        for algo in algos:
            for seed in seeds:
                try:
                    res, _ = run_algorithm(algo, inst, seed, params.get(algo))
                    length, elapsed = res.length, res.elapsed
                except InvalidConvergence:
                    length, elapsed = None, None
                except (TooLargeForBruteForce, TooLargeForHeldKarp) as exc:
                    raise ConfigError(f"{algo} cannot run on {inst.name}: {exc}") from None
                gap = None
                if optimal is not None and length is not None:
                    gap = 100.0 * (length - optimal) / optimal
                rows.append({"instance": inst.name, "n": inst.n, "algorithm": algo,
                             "length": length, "optimal": optimal, "gap_pct": gap,
                             "elapsed_ms": elapsed, "seed": seed})
    rows.sort(key=lambda r: (r["instance"], r["algorithm"], r["seed"]))
    return rows


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def bench_csv(rows, timing=True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        r = dict(r)
        if not timing:
            r["elapsed_ms"] = None
        w.writerow([_cell(r[k]) for k in BENCH_HEADER])
    return buf.getvalue()


def cmd_bench(suite: dict, out=None, timing=True) -> str:
    text = bench_csv(bench_rows(suite), timing)
    out = out or suite.get("out")
    if out:
        _write_text(out, text)
    return text


# -- GNN experiment -------------------------------------------------------------------

def cmd_gnn(config: dict) -> dict:
    from .gnn.graph import make_shortest_path_dataset, make_tsp_dataset
    from .gnn.io import params_to_dict, save_json
    from .gnn.train import TrainConfig, train_edge_classifier

    check_keys(config, GNN_KEYS, "gnn")
    task = config.get("task", "shortest-path")
    if task not in GNN_TASKS:
        raise ConfigError(f"task must be one of {', '.join(GNN_TASKS)}, got {task!r}")
    seed = _seed(config.get("seed", 0))
    count = int(config.get("count", 200))
    lo, hi = config.get("n_range", [8, 16])
    train_cfg = _dataclass_from(TrainConfig, config.get("train") or {}, "train")
    t0 = time.perf_counter()
    builder = make_shortest_path_dataset if task == "shortest-path" else make_tsp_dataset
    dataset = builder(count, (int(lo), int(hi)), seed)
    params, report = train_edge_classifier(dataset, train_cfg, seed)
    doc = {"version": CONFIG_VERSION, "kind": "gnn_report", "dataset_seed": seed,
           "count": count, "n_range": [int(lo), int(hi)], **report.to_dict(),
           "elapsed_ms": (time.perf_counter() - t0) * 1000.0}
    doc["task"] = task
    try:
        if config.get("params_out"):
            save_json(params_to_dict(params), config["params_out"])
    except OSError as exc:
        raise IoFailure(f"cannot write parameters: {exc}") from None
    if config.get("out"):
        _write_text(config["out"], json.dumps(doc, indent=1) + "\n")
    return doc


# -- argparse front end -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tspnn", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write random EUC_2D instances")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--prefix", default="rand")

    s = sub.add_parser("solve", help="solve one instance, print a JSON result")
    s.add_argument("--config")
    s.add_argument("--instance")
    s.add_argument("--algo")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--trace-out")
    s.add_argument("--snapshots-out")

    b = sub.add_parser("bench", help="run a benchmark suite, write CSV")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.add_argument("--no-timing", action="store_true", help="leave elapsed_ms empty")

    t = sub.add_parser("gnn-train", help="build a dataset, train and report")
    t.add_argument("--config")
    t.add_argument("--task", choices=sorted(GNN_TASKS))
    t.add_argument("--seed", type=int)
    t.add_argument("--count", type=int)
    t.add_argument("--n", type=int, help="largest node count (smallest is 8)")
    t.add_argument("--epochs", type=int)
    t.add_argument("--out")
    t.add_argument("--params-out")
    return ap


def _overlay(config: dict, **flags) -> dict:
    out = dict(config)
    for k, v in flags.items():
        if v is not None:
            out[k] = v
    return out


def _dispatch(args) -> int:
    if args.command == "gen":
        for p in cmd_gen(args.n, args.count, _seed(args.seed), args.out, args.prefix):
            print(p)
        return EXIT_OK
    if args.command == "solve":
        config = load_config(args.config) if args.config else {"version": CONFIG_VERSION}
        config = _overlay(config, algorithm=args.algo, instance=args.instance, seed=args.seed,
                          out=args.out, trace_out=args.trace_out, snapshots_out=args.snapshots_out)
        print(json.dumps(cmd_solve(config), indent=1))
        return EXIT_OK
    if args.command == "bench":
        text = cmd_bench(load_config(args.config), args.out, timing=not args.no_timing)
        if not (args.out or load_config(args.config).get("out")):
            sys.stdout.write(text)
        return EXIT_OK
    config = load_config(args.config) if args.config else {"version": CONFIG_VERSION}
    train = dict(config.get("train") or {})
    if args.epochs is not None:
        train["epochs"] = args.epochs
    config = _overlay(config, task=args.task, seed=args.seed, count=args.count,
                      out=args.out, params_out=args.params_out)
    if args.n is not None:
        config["n_range"] = [min(8, args.n), args.n]
    if train:
        config["train"] = train
    print(json.dumps(cmd_gnn(config), indent=1))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TspError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
