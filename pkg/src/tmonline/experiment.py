"""Cross-validated experiments: presets, fan-out over orderings, aggregation.

Seeds: ordering ``i`` of an experiment with master seed ``m`` runs its
machine with ``derive_seed(m, i)``; fault plans generated for that ordering
use ``derive_seed(derive_seed(m, i), 0)``. Re-running a single ordering
therefore reproduces the same numbers as the full sweep.
"""
from __future__ import annotations

import csv
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .data import (SET_NAMES, SetAllocation, bundled_dataset_path, enumerate_orderings,
                   load_dataset, materialize_sets, partition_blocks)
from .errors import ConfigurationError, TMError
from .machine import TMConfig, TsetlinMachine
from .manager import (HISTORY_COLUMNS, Event, MitigationPolicy, RunHistory, Schedule,
                      resolve_fault_spec, run_schedule)
from .rng import derive_seed

USE_CASES = ("baseline", "limited_data", "new_class", "faults", "custom")
CURVE_COLUMNS = ["checkpoint", "iteration", "set", "mean_accuracy", "std_accuracy", "runs"]
SEARCH_COLUMNS = ["rank", "clauses", "T", "s", "mean_offline", "mean_validation",
                  "mean_online"]


class ExperimentError(TMError):
    pass


@dataclass
class ExperimentSpec:
    use_case: str = "custom"
    dataset: Optional[str] = None
    block_len: int = 30
    allocation: tuple = (30, 60, 60)
    clauses: int = 16
    clauses_max: Optional[int] = None
    classes_max: Optional[int] = None
    initial_classes: Optional[tuple] = None
    ta_half_states: int = 128
    s_offline: float = 1.375
    s_online: float = 1.0
    threshold: int = 15
    s_mapping: str = "canonical"
    schedule: Schedule = field(default_factory=Schedule)
    mitigation: Optional[MitigationPolicy] = None
    orderings: int = 120
    seed: int = 0
    out_dir: Optional[str] = None
    workers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = self.schedule.to_dict()
        d["allocation"] = list(self.allocation)
        return d


def preset(use_case: str, **overrides) -> ExperimentSpec:
    """Experiment settings for one of the three use cases (or the offline baseline).

    Keyword overrides replace spec fields; ``online_learning`` and
    ``online_iterations`` are forwarded to the schedule.
    """
    if use_case not in USE_CASES:
        raise ConfigurationError(f"unknown use case {use_case!r}; choose from {USE_CASES}")
    sched = {k: overrides.pop(k) for k in ("online_learning", "online_iterations",
                                           "offline_epochs") if k in overrides}
    spec = ExperimentSpec(use_case=use_case)
    if use_case == "baseline":
        spec.schedule = Schedule(online_iterations=0, offline_limit=20)
    elif use_case == "limited_data":
        spec.schedule = Schedule(offline_limit=20)
    elif use_case == "new_class":
        spec.schedule = Schedule(filter_class=0, events=[
            Event(5, "enable_class", 0), Event(5, "disable_class_filter")])
        spec.initial_classes = (1, 2)
    elif use_case == "faults":
        spec.schedule = Schedule(offline_limit=20, events=[
            Event(5, "inject_fault_plan", "even:0.2:stuck_at_0")])
    for k, v in sched.items():
        setattr(spec.schedule, k, v)
    return replace(spec, **overrides)


def load_blocks(spec: ExperimentSpec):
    path = spec.dataset or bundled_dataset_path()
    dataset, _ = load_dataset(path)
    store = partition_blocks(dataset, spec.block_len)
    alloc = SetAllocation(*spec.allocation)
    alloc.check(store)
    return dataset, store, alloc


def build_machine(spec: ExperimentSpec, num_features: int, num_classes: int,
                  seed: int) -> TsetlinMachine:
    classes_max = spec.classes_max or num_classes
    mask = None
    if spec.initial_classes is not None:
        mask = [c in spec.initial_classes for c in range(classes_max)]
    cfg = TMConfig(
        num_classes_max=classes_max,
        num_clauses_max=spec.clauses_max or spec.clauses,
        num_features=num_features,
        num_clauses_active=spec.clauses,
        ta_half_states=spec.ta_half_states,
        s_offline=spec.s_offline,
        s_online=spec.s_online,
        threshold_T=spec.threshold,
        class_active_mask=mask,
        rng_seed=seed,
        s_mapping=spec.s_mapping,
    )
    return TsetlinMachine(cfg)


def run_ordering(spec: ExperimentSpec, index: int, ordering=None, _cache=None) -> RunHistory:
    """Run ordering number ``index`` of the lexicographic enumeration."""
    dataset, store, alloc = _cache or load_blocks(spec)
    if ordering is None:
        ordering = enumerate_orderings(len(store), index + 1)[index]
    try:
        sets = materialize_sets(store, ordering, alloc)
        seed = derive_seed(spec.seed, index)
        machine = build_machine(spec, dataset.num_features, dataset.num_classes, seed)
        base_dir = os.path.dirname(spec.dataset) if spec.dataset else None
        events = [
            replace(ev, value=resolve_fault_spec(ev.value, machine.shape,
                                                 derive_seed(seed, 0), base_dir))
            if ev.action == "inject_fault_plan" else ev
            for ev in spec.schedule.events
        ]
        schedule = replace(spec.schedule, events=events)
        return run_schedule(schedule, machine, sets, mitigation=spec.mitigation,
                            ordering_id=index, ordering=ordering)
    except TMError as exc:
        raise ExperimentError(f"ordering {index} {tuple(ordering)}: {exc}") from exc


def _run_chunk(args):
    spec, indices = args
    cache = load_blocks(spec)
    return [run_ordering(spec, i, None, cache) for i in indices]


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    histories: list
    elapsed: float = 0.0

    def curve(self, set_id: str) -> np.ndarray:
        """Mean accuracy per checkpoint over orderings."""
        return np.mean([h.accuracy(set_id) for h in self.histories], axis=0)

    def curves(self) -> list:
        rows = []
        n_cp = max(h.num_checkpoints for h in self.histories)
        for cp in range(n_cp):
            for name in SET_NAMES:
                vals, iters = [], set()
                for h in self.histories:
                    for r in h.records:
                        if r.checkpoint == cp and r.set_id == name:
                            vals.append(r.accuracy)
                            iters.add(r.online_iteration_index)
                if vals:
                    rows.append([cp, min(iters), name, float(np.mean(vals)),
                                 float(np.std(vals)), len(vals)])
        return rows

    def gain(self, set_id: str) -> float:
        c = self.curve(set_id)
        return float(c[-1] - c[0])

    def write(self, out_dir: str):
        os.makedirs(os.path.join(out_dir, "orderings"), exist_ok=True)
        with open(os.path.join(out_dir, "curves.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CURVE_COLUMNS)
            for cp, it, name, mean, std, n in self.curves():
                w.writerow([cp, it, name, f"{mean:.6f}", f"{std:.6f}", n])
        with open(os.path.join(out_dir, "runs.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            for h in self.histories:
                w.writerows(h.rows())
        for h in self.histories:
            stem = os.path.join(out_dir, "orderings", f"ordering_{h.ordering_id:04d}")
            h.to_csv(stem + ".csv")
            h.to_json(stem + ".json")
        with open(os.path.join(out_dir, "experiment.json"), "w") as fh:
            json.dump(self.spec.to_dict(), fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    start = time.perf_counter()
    cache = load_blocks(spec)
    n = len(enumerate_orderings(len(cache[1]), spec.orderings))
    if spec.workers > 1 and n > 1:
        chunks = [list(range(i, n, spec.workers)) for i in range(spec.workers)]
        with ProcessPoolExecutor(spec.workers) as pool:
            parts = list(pool.map(_run_chunk, [(spec, c) for c in chunks if c]))
        histories = sorted(itertools.chain.from_iterable(parts),
                           key=lambda h: h.ordering_id)
    else:
        histories = [run_ordering(spec, i, None, cache) for i in range(n)]
    result = ExperimentResult(spec, histories, time.perf_counter() - start)
    if spec.out_dir:
        result.write(spec.out_dir)
    return result


def hyperparam_search(spec: ExperimentSpec, s_values: Sequence[float],
                      T_values: Sequence[int], clause_values: Sequence[int]) -> list:
    """Score every grid point by mean validation accuracy of the baseline run.

    Rows are ranked best first; ties go to fewer clauses, then lower T, then
    lower s.
    """
    grid = list(itertools.product(clause_values, T_values, s_values))
    if not grid:
        raise ConfigurationError("hyperparameter grid is empty")
    rows = []
    for clauses, T, s in grid:
        point = replace(spec, clauses=clauses, clauses_max=max(clauses, spec.clauses_max or 0),
                        threshold=T, s_offline=s, out_dir=None)
        res = run_experiment(point)
        rows.append([clauses, T, s] + [float(res.curve(name)[-1]) for name in SET_NAMES])
    rows.sort(key=lambda r: (-r[4], r[0], r[1], r[2]))
    return [[rank] + r for rank, r in enumerate(rows, start=1)]


def write_search_table(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEARCH_COLUMNS)
        for row in rows:
            w.writerow(row[:4] + [f"{v:.6f}" for v in row[4:]])
