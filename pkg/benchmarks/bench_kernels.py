"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both variants are always importable when numba is installed, regardless of
TSPNN_DISABLE_NUMBA; outputs are checked for equality before timing.
"""
import argparse
import json
import sys
import time

import numpy as np

from tspnn import _accel
from tspnn.core import random_instance
from tspnn.kernels import NUMBA_KERNELS, NUMPY_KERNELS


def cases():
    rng = np.random.default_rng(0)
    d16 = random_instance(16, 1).dist
    d10 = random_instance(10, 2).dist
    d200 = random_instance(200, 3).dist
    tour = rng.permutation(200).astype(np.int64)
    d12 = random_instance(12, 4).dist
    R = rng.normal(size=(8, 12, 12))
    d60 = random_instance(60, 5).dist
    R60 = rng.normal(size=(60, 60))
    succ60 = NUMPY_KERNELS["greedy_assignment"](R60)
    return [
        ("held_karp n=16", "held_karp", (d16,)),
        ("brute_force n=10", "brute_force", (d10,)),
        ("two_opt n=200", "two_opt", (tour, d200)),
        ("patch_subtours n=60", "patch_subtours", (succ60, d60)),
        ("decode_batch M=8 n=12", "decode_batch", (R, d12)),
    ]


def best_time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    results = []
    print(f"{'kernel':<24}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for label, name, inputs in cases():
        nb, npf = NUMBA_KERNELS[name], NUMPY_KERNELS[name]
        out_nb = nb(*inputs)  # first call compiles or loads the cache
        if not same(out_nb, npf(*inputs)):
            raise SystemExit(f"{name}: numba and numpy outputs differ")
        t_nb = best_time(nb, inputs, args.repeat)
        t_np = best_time(npf, inputs, args.repeat)
        results.append({"kernel": label, "numba_ms": t_nb * 1e3, "numpy_ms": t_np * 1e3,
                        "speedup": t_np / t_nb})
        print(f"{label:<24}{t_nb * 1e3:>12.3f}{t_np * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"backend_default": _accel.backend(), "results": results}, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
