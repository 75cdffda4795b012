"""Command-line front end.

Subcommands::

    tmonline run         run a use case over block orderings, write curves
    tmonline search      grid search over s, T and clause count
    tmonline booleanize  raw CSV -> canonical boolean dataset file
    tmonline bench       train/classify throughput for a machine size
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace

import numpy as np

from . import _jit
from .data import booleanize_file
from .errors import TMError
from .experiment import (USE_CASES, hyperparam_search, preset, run_experiment,
                         write_search_table)
from .fault import STUCK_AT_0, STUCK_AT_1
from .machine import S_MAPPINGS, TMConfig, TsetlinMachine
from .manager import Event, MitigationPolicy, load_schedule, parse_event


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _on_off(text):
    v = text.lower()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def add_experiment_args(p):
    g = p.add_argument_group("experiment")
    g.add_argument("--dataset", help="canonical dataset file (default: bundled iris)")
    g.add_argument("--use-case", choices=USE_CASES, default="limited_data")
    g.add_argument("--orderings", type=int, default=120, help="number of block orderings")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--block-len", type=int, default=30)
    g.add_argument("--allocation", type=_ints, default=[30, 60, 60],
                   help="offline,validation,online set lengths")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--out-dir")

    g = p.add_argument_group("machine")
    g.add_argument("--clauses", type=int, default=16, help="active clauses per class")
    g.add_argument("--clauses-max", type=int, help="provisioned clauses per class")
    g.add_argument("--classes-max", type=int, help="provisioned classes")
    g.add_argument("--states", type=int, default=128, help="TA states per action (N)")
    g.add_argument("--s-offline", type=float, default=1.375)
    g.add_argument("--s-online", type=float, default=1.0)
    g.add_argument("--threshold", type=int, default=15, help="T")
    g.add_argument("--s-mapping", choices=sorted(S_MAPPINGS), default="canonical")

    g = p.add_argument_group("schedule")
    g.add_argument("--schedule", help="key/value schedule file (overrides the preset)")
    g.add_argument("--offline-epochs", type=int)
    g.add_argument("--online-iterations", type=int)
    g.add_argument("--offline-limit", type=int,
                   help="use only the first N offline points (preset: 20)")
    g.add_argument("--online-learning", type=_on_off, help="on/off")
    g.add_argument("--checkpoint-interval", type=int,
                   help="checkpoint every K online datapoints instead of per iteration")
    g.add_argument("--event", action="append", default=[], metavar="AT:ACTION[=VALUE]",
                   help="extra runtime event, e.g. 5:enable_class=0 (repeatable)")
    g.add_argument("--no-preset-events", action="store_true",
                   help="drop the use case's built-in events")
    g.add_argument("--filter-class", type=int,
                   help="withhold this class from data and machine until introduced")
    g.add_argument("--fault-fraction", type=float, help="fraction of TAs to fault")
    g.add_argument("--fault-kind", choices=(STUCK_AT_0, STUCK_AT_1), default=STUCK_AT_0)
    g.add_argument("--fault-at", type=int, default=5,
                   help="online iteration after which faults are injected")
    g.add_argument("--mitigate-threshold", type=float,
                   help="offline accuracy below which mitigation fires")
    g.add_argument("--mitigate-actions", default="enable_clauses",
                   help="comma list of enable_clauses,retrain")


def spec_from_args(args):
    spec = preset(args.use_case)
    sched = spec.schedule
    if args.schedule:
        sched = load_schedule(args.schedule)
    if args.no_preset_events:
        sched.events = []
    for name in ("offline_epochs", "online_iterations", "offline_limit",
                 "checkpoint_interval"):
        value = getattr(args, name)
        if value is not None:
            setattr(sched, name, value)
    if args.online_learning is not None:
        sched.online_learning = args.online_learning
    initial = spec.initial_classes
    if args.filter_class is not None:
        sched.filter_class = args.filter_class
        n_classes = args.classes_max or _dataset_classes(args.dataset)
        initial = tuple(c for c in range(n_classes) if c != args.filter_class)
    if args.fault_fraction is not None:
        sched.events = [e for e in sched.events if e.action != "inject_fault_plan"]
        sched.events.append(Event(args.fault_at, "inject_fault_plan",
                                  f"even:{args.fault_fraction}:{args.fault_kind}"))
    sched.events.extend(parse_event(e) for e in args.event)
    mitigation = None
    if args.mitigate_threshold is not None:
        mitigation = MitigationPolicy(args.mitigate_threshold,
                                      tuple(a.strip() for a in args.mitigate_actions.split(",")))
    return replace(
        spec, dataset=args.dataset, orderings=args.orderings, seed=args.seed,
        block_len=args.block_len, allocation=tuple(args.allocation),
        clauses=args.clauses, clauses_max=args.clauses_max, classes_max=args.classes_max,
        initial_classes=initial, ta_half_states=args.states, s_offline=args.s_offline,
        s_online=args.s_online, threshold=args.threshold, s_mapping=args.s_mapping,
        schedule=sched, mitigation=mitigation, out_dir=args.out_dir, workers=args.workers)


def _dataset_classes(path):
    from .data import bundled_dataset_path, load_dataset
    _, manifest = load_dataset(path or bundled_dataset_path())
    return manifest["C"]


def cmd_run(args):
    spec = spec_from_args(args)
    result = run_experiment(spec)
    print(f"use case {spec.use_case}: {len(result.histories)} orderings "
          f"in {result.elapsed:.2f}s")
    print(f"{'set':<12}{'start':>8}{'final':>8}{'gain':>8}")
    for name in spec.schedule.sets_to_analyze:
        c = result.curve(name) * 100
        print(f"{name:<12}{c[0]:8.2f}{c[-1]:8.2f}{c[-1] - c[0]:+8.2f}")
    if spec.out_dir:
        print(f"wrote {spec.out_dir}/curves.csv")
    return 0


def cmd_search(args):
    spec = spec_from_args(args)
    spec = replace(spec, use_case="baseline", schedule=preset("baseline").schedule,
                   out_dir=None)
    rows = hyperparam_search(spec, args.grid_s, args.grid_T, args.grid_clauses)
    print(f"{'rank':>4} {'clauses':>7} {'T':>4} {'s':>7} {'offline':>8} {'valid':>8}")
    for rank, clauses, T, s, off, val, _ in rows:
        print(f"{rank:4d} {clauses:7d} {T:4d} {s:7.3f} {off * 100:8.2f} {val * 100:8.2f}")
    if args.out:
        write_search_table(rows, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_booleanize(args):
    ds = booleanize_file(args.raw, args.output, args.bins, args.shuffle_seed)
    print(f"wrote {args.output}: {len(ds)} rows, F={ds.num_features} C={ds.num_classes}")
    return 0


def bench(classes=3, clauses=16, features=16, points=2000, repeats=3, backend=None,
          seed=0):
    """Throughput of train_step and classify on random data; results are seed-determined."""
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(points, features)).astype(np.uint8)
    y = rng.integers(0, classes, size=points)
    cfg = TMConfig(classes, clauses, features, rng_seed=seed)
    # warm-up compiles the numba kernels
    TsetlinMachine(cfg).fit(X[:2], y[:2], backend=backend).predict(X[:2], backend=backend)
    train_t, pred_t = [], []
    for _ in range(repeats):
        m = TsetlinMachine(TMConfig(classes, clauses, features, rng_seed=seed))
        t0 = time.perf_counter()
        m.fit(X, y, backend=backend)
        t1 = time.perf_counter()
        pred = m.predict(X, backend=backend)
        t2 = time.perf_counter()
        train_t.append(t1 - t0)
        pred_t.append(t2 - t1)
    return {
        "backend": backend or ("numba" if _jit.USE_NUMBA else "numpy"),
        "classes": classes, "clauses": clauses, "features": features, "points": points,
        "train_steps_per_s": points / min(train_t),
        "classifications_per_s": points / min(pred_t),
        "prediction_checksum": int(np.sum(pred * np.arange(1, points + 1))),
    }


def cmd_bench(args):
    backends = ["numba", "numpy"] if args.compare else [args.backend]
    reports = [bench(args.classes, args.clauses, args.features, args.points,
                     args.repeats, b, args.seed) for b in backends]
    if args.json:
        print(json.dumps(reports, indent=2))
        return 0
    for r in reports:
        print(f"backend={r['backend']} classes={r['classes']} clauses={r['clauses']} "
              f"features={r['features']} points={r['points']}")
        print(f"  train steps/s     {r['train_steps_per_s']:14,.0f}")
        print(f"  classifications/s {r['classifications_per_s']:14,.0f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="tmonline",
                                description="Online-learning Tsetlin Machine simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment over block orderings")
    add_experiment_args(run)
    run.set_defaults(func=cmd_run)

    search = sub.add_parser("search", help="hyperparameter grid search")
    add_experiment_args(search)
    search.add_argument("--grid-s", type=_floats, default=[1.375])
    search.add_argument("--grid-T", type=_ints, default=[15])
    search.add_argument("--grid-clauses", type=_ints, default=[16])
    search.add_argument("--out", help="write the ranked table as CSV")
    search.set_defaults(func=cmd_search)

    boo = sub.add_parser("booleanize", help="thermometer-encode a raw CSV")
    boo.add_argument("raw")
    boo.add_argument("output")
    boo.add_argument("--bins", type=int, default=4)
    boo.add_argument("--shuffle-seed", type=int,
                     help="permute rows once with this seed before writing")
    boo.set_defaults(func=cmd_booleanize)

    b = sub.add_parser("bench", help="train/classify throughput")
    b.add_argument("--classes", type=int, default=3)
    b.add_argument("--clauses", type=int, default=16)
    b.add_argument("--features", type=int, default=16)
    b.add_argument("--points", type=int, default=2000)
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--backend", choices=("numba", "numpy"))
    b.add_argument("--compare", action="store_true", help="run both backends")
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TMError, OSError) as exc:
        print(f"tmonline: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
