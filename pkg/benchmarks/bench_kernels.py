"""Compare the numba and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--points 4000] [--clauses 16 64]

Both backends consume the same random draws, so besides timing this also
checks that they end in identical TA states.
"""
import argparse
import time

import numpy as np

from tmonline.kernels import class_sums, train_sequence
from tmonline.machine import canonical_mapping


def make_problem(classes, clauses, features, points, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(points, features)).astype(np.uint8)
    lits = np.concatenate([X, 1 - X], axis=1)
    y = rng.integers(0, classes, size=points).astype(np.int64)
    shape = (classes, clauses, 2 * features)
    states = np.full(shape, 127, dtype=np.int64)
    and_mask = np.ones(shape, dtype=np.uint8)
    or_mask = np.zeros(shape, dtype=np.uint8)
    return states, and_mask, or_mask, lits, y


def time_backend(backend, classes, clauses, features, points):
    states, am, om, lits, y = make_problem(classes, clauses, features, points)
    active = np.arange(classes)
    p_str, p_weak = canonical_mapping(3.9)
    args = (am, om, active, clauses, 128, 15, p_str, p_weak)
    # compile / warm caches
    train_sequence(states.copy(), *args, lits[:2], y[:2], 1, 0, backend=backend)
    class_sums(states, am, om, active, clauses, 128, lits[:2], backend=backend)

    t0 = time.perf_counter()
    train_sequence(states, *args, lits, y, 1, 0, backend=backend)
    t1 = time.perf_counter()
    sums = class_sums(states, am, om, active, clauses, 128, lits, backend=backend)
    t2 = time.perf_counter()
    return t1 - t0, t2 - t1, states, sums


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4000)
    ap.add_argument("--classes", type=int, default=3)
    ap.add_argument("--features", type=int, default=16)
    ap.add_argument("--clauses", type=int, nargs="+", default=[16, 64])
    args = ap.parse_args()

    print(f"{'clauses':>7} {'backend':>7} {'train/s':>12} {'classify/s':>12} {'speedup':>8}")
    for C in args.clauses:
        res = {b: time_backend(b, args.classes, C, args.features, args.points)
               for b in ("numpy", "numba")}
        assert np.array_equal(res["numpy"][2], res["numba"][2]), "backends diverged"
        assert np.array_equal(res["numpy"][3], res["numba"][3]), "class sums differ"
        for b in ("numpy", "numba"):
            tt, ct = res[b][:2]
            speed = res["numpy"][0] / tt
            print(f"{C:7d} {b:>7} {args.points / tt:12,.0f} {args.points / ct:12,.0f} "
                  f"{speed:7.1f}x")


if __name__ == "__main__":
    main()
