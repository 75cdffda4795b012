"""Execution flow: offline training, checkpoints, online iterations and events.

One run follows the accelerator's high-level manager:

1. train on the offline set for ``offline_epochs`` passes;
2. checkpoint (accuracy analysis of the chosen sets);
3. for each online iteration: fire the events due, stream the online set
   through the cyclic buffer into ``train_step`` (if online learning is on),
   then checkpoint.

An event with ``at_online_iteration = k`` fires after ``k`` completed online
iterations, i.e. before the training pass of iteration ``k + 1``.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .data import SET_NAMES, CyclicBuffer, Dataset, ThreeSets, filter_class
from .errors import AnalysisError, ConfigurationError, ParseError, ScheduleError
from .fault import FaultPlan, generate_even_spread_plan
from .machine import TsetlinMachine, _check_clause_count

ACTIONS = (
    "enable_class",
    "disable_class_filter",
    "inject_fault_plan",
    "clear_faults",
    "set_active_clauses",
    "set_s",
    "set_T",
    "enable_online_learning",
    "retrain",
)
HISTORY_COLUMNS = ["ordering", "checkpoint", "set", "errors", "total", "accuracy"]
ANALYSIS_NOTE = "sets are analyzed through the same class filter used for training"


@dataclass(frozen=True)
class Event:
    at_online_iteration: int
    action: str
    value: Any = None

    def describe(self) -> dict:
        value = self.value
        if isinstance(value, FaultPlan):
            value = f"FaultPlan({len(value)} faults)"
        return {"at": self.at_online_iteration, "action": self.action, "value": value}


def parse_event(text: str) -> Event:
    """``AT:ACTION[=VALUE]``, e.g. ``5:enable_class=0`` or ``5:disable_class_filter``."""
    at, sep, rest = text.strip().partition(":")
    if not sep:
        raise ParseError(f"event {text!r} must look like AT:ACTION[=VALUE]")
    action, _, raw = rest.partition("=")
    action = action.strip()
    if action not in ACTIONS:
        raise ParseError(f"unknown event action {action!r}; choose from {', '.join(ACTIONS)}")
    try:
        at = int(at)
    except ValueError:
        raise ParseError(f"bad event time {at!r}") from None
    raw = raw.strip()
    value: Any = None
    if action in ("enable_class", "set_active_clauses", "set_T"):
        value = _parse_int(raw, text)
    elif action == "set_s":
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"bad value in event {text!r}") from None
    elif action == "enable_online_learning":
        value = _parse_bool(raw or "true")
    elif action == "retrain":
        value = _parse_int(raw, text) if raw else None
    elif action == "inject_fault_plan":
        if not raw:
            raise ParseError("inject_fault_plan needs a table path or even:FRACTION:KIND")
        value = raw
    return Event(at, action, value)


def _parse_int(raw, text):
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"bad value in event {text!r}") from None


def _parse_bool(raw):
    v = str(raw).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ParseError(f"bad boolean {raw!r}")


def resolve_fault_spec(spec, dims, seed=0, base_dir=None) -> FaultPlan:
    """Turn ``even:FRACTION:KIND`` or a table path into a FaultPlan."""
    if isinstance(spec, FaultPlan):
        return spec
    if spec.startswith("even:"):
        try:
            _, frac, kind = spec.split(":")
            return generate_even_spread_plan(float(frac), kind, dims, seed)
        except ValueError as exc:
            raise ParseError(f"bad fault spec {spec!r}: {exc}") from None
    path = spec if base_dir is None else os.path.join(base_dir, spec)
    return FaultPlan.load(path, dims)


@dataclass
class Schedule:
    offline_epochs: int = 10
    online_iterations: int = 16
    # None: one checkpoint per online iteration; k: one per k online datapoints
    checkpoint_interval: Optional[int] = None
    sets_to_analyze: Sequence[str] = SET_NAMES
    events: list = field(default_factory=list)
    online_learning: bool = True
    filter_class: Optional[int] = None
    offline_limit: Optional[int] = None
    buffer_capacity: int = 64

    def validate(self, machine: TsetlinMachine):
        cfg = machine.config
        if self.offline_epochs < 0 or self.online_iterations < 0:
            raise ScheduleError("epoch and iteration counts must be >= 0")
        if self.checkpoint_interval is not None and self.checkpoint_interval < 1:
            raise ScheduleError("checkpoint_interval must be >= 1")
        if self.buffer_capacity < 1:
            raise ScheduleError("buffer_capacity must be >= 1")
        bad = set(self.sets_to_analyze) - set(SET_NAMES)
        if bad or not self.sets_to_analyze:
            raise ScheduleError(f"sets_to_analyze must be a non-empty subset of {SET_NAMES}")
        if self.filter_class is not None and not 0 <= self.filter_class < cfg.num_classes_max:
            raise ScheduleError(f"filter_class {self.filter_class} out of range")
        for ev in self.events:
            _validate_event(ev, self, machine)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sets_to_analyze"] = list(self.sets_to_analyze)
        d["events"] = [ev.describe() for ev in self.events]
        return d


def _validate_event(ev: Event, schedule: Schedule, machine: TsetlinMachine):
    cfg = machine.config
    where = f"event {ev.describe()}"
    if ev.action not in ACTIONS:
        raise ScheduleError(f"{where}: unknown action")
    if not 0 <= ev.at_online_iteration < schedule.online_iterations:
        raise ScheduleError(f"{where}: time outside 0..{schedule.online_iterations - 1}")
    v = ev.value
    try:
        if ev.action == "enable_class":
            if not (isinstance(v, (int, np.integer)) and 0 <= v < cfg.num_classes_max):
                raise ScheduleError(f"{where}: class id out of range")
        elif ev.action == "set_active_clauses":
            _check_clause_count(v, cfg.num_clauses_max)
        elif ev.action == "retrain" and v is not None:
            _check_clause_count(v, cfg.num_clauses_max)
        elif ev.action == "set_s" and not (v is not None and v >= 1):
            raise ScheduleError(f"{where}: s must be >= 1")
        elif ev.action == "set_T" and not (isinstance(v, (int, np.integer)) and v >= 1):
            raise ScheduleError(f"{where}: T must be a positive integer")
        elif ev.action == "enable_online_learning" and not isinstance(v, bool):
            raise ScheduleError(f"{where}: value must be a boolean")
        elif ev.action == "inject_fault_plan":
            if not isinstance(v, FaultPlan):
                raise ScheduleError(f"{where}: fault plan not resolved")
            if v.dims != machine.shape:
                raise ScheduleError(f"{where}: plan dims {v.dims} != machine {machine.shape}")
    except ConfigurationError as exc:
        raise ScheduleError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class AccuracyRecord:
    set_id: str
    errors: int
    total: int
    online_iteration_index: int
    checkpoint: int = 0

    @property
    def accuracy(self) -> float:
        return 1.0 - self.errors / self.total


@dataclass
class RunHistory:
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    ordering_id: Optional[int] = None
    ordering: Optional[tuple] = None
    seed: Optional[int] = None
    event_log: list = field(default_factory=list)
    dropped: int = 0
    train_steps: int = 0

    @property
    def num_checkpoints(self) -> int:
        return 1 + max((r.checkpoint for r in self.records), default=-1)

    def sets(self) -> list:
        return [s for s in SET_NAMES if any(r.set_id == s for r in self.records)]

    def accuracy(self, set_id: str) -> np.ndarray:
        return np.array([r.accuracy for r in self.records if r.set_id == set_id])

    def latest(self, set_id: str) -> Optional[AccuracyRecord]:
        recs = [r for r in self.records if r.set_id == set_id]
        return recs[-1] if recs else None

    def rows(self):
        oid = "" if self.ordering_id is None else self.ordering_id
        for r in self.records:
            yield [oid, r.checkpoint, r.set_id, r.errors, r.total, f"{r.accuracy:.6f}"]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            w.writerows(self.rows())

    def sidecar(self) -> dict:
        return {
            "ordering_id": self.ordering_id,
            "ordering": list(self.ordering) if self.ordering is not None else None,
            "seed": self.seed,
            "config": self.config,
            "event_log": self.event_log,
            "dropped": self.dropped,
            "train_steps": self.train_steps,
            "checkpoint_iterations": sorted(
                {(r.checkpoint, r.online_iteration_index) for r in self.records}),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def same_as(self, other: "RunHistory") -> bool:
        return self.records == other.records and self.event_log == other.event_log \
            and self.train_steps == other.train_steps


class System:
    """Mutable run state shared by the flow loop and event handlers."""

    def __init__(self, machine: TsetlinMachine, sets: ThreeSets, schedule: Schedule,
                 fault_plan: Optional[FaultPlan] = None):
        self.machine = machine
        self.sets = sets
        self.schedule = schedule
        self.fault_plan = fault_plan
        self.filter_class = schedule.filter_class
        self.filter_enabled = schedule.filter_class is not None
        self.online_learning = schedule.online_learning
        self.s_online = machine.config.s_online

    def view(self, name: str) -> Dataset:
        ds = getattr(self.sets, name)
        if name == "offline":
            ds = ds.head(self.schedule.offline_limit)
        return filter_class(ds, self.filter_class, self.filter_enabled)


def run_offline_training(machine: TsetlinMachine, offline_set: Dataset, epochs: int,
                         s_offline: Optional[float] = None, fault_plan=None):
    if len(offline_set) == 0:
        raise ScheduleError("offline training set is empty")
    if epochs:
        machine.fit(offline_set.X, offline_set.y, s_offline, fault_plan, epochs=epochs)
    return machine


def analyze_accuracy(machine: TsetlinMachine, dataset: Dataset, fault_plan=None,
                     set_id: str = "", online_iteration_index: int = 0,
                     checkpoint: int = 0) -> AccuracyRecord:
    if len(dataset) == 0:
        raise AnalysisError(f"cannot analyze empty set {set_id!r}")
    pred = machine.predict(dataset.X, fault_plan)
    errors = int(np.count_nonzero(pred != dataset.y))
    return AccuracyRecord(set_id, errors, len(dataset), online_iteration_index, checkpoint)


def apply_event(event: Event, system: System) -> System:
    m = system.machine
    a, v = event.action, event.value
    if a == "enable_class":
        m.enable_class(v)
    elif a == "disable_class_filter":
        system.filter_enabled = False
    elif a == "inject_fault_plan":
        system.fault_plan = v
    elif a == "clear_faults":
        system.fault_plan = None
    elif a == "set_active_clauses":
        m.set_active_clauses(v)
    elif a == "set_s":
        system.s_online = float(v)
    elif a == "set_T":
        m.config.threshold_T = int(v)
    elif a == "enable_online_learning":
        system.online_learning = bool(v)
    elif a == "retrain":
        if v is not None:
            m.set_active_clauses(v)
        m.reset()
        run_offline_training(m, system.view("offline"), system.schedule.offline_epochs,
                             m.config.s_offline, system.fault_plan)
    else:
        raise ScheduleError(f"unknown action {a!r}")
    return system


@dataclass
class MitigationPolicy:
    """Reacts when the latest accuracy of ``set_id`` falls below ``threshold``.

    ``actions`` holds ``"enable_clauses"`` (grow to the clause maximum) and/or
    ``"retrain"`` (reset and redo offline training).
    """
    threshold: float
    actions: Sequence[str] = ("enable_clauses",)
    set_id: str = "offline"
    once: bool = True


def mitigation_policy(history: RunHistory, threshold: float,
                      actions: Sequence[str] = ("enable_clauses",), clauses_max=None,
                      set_id: str = "offline") -> Optional[Event]:
    latest = history.latest(set_id)
    if latest is None:
        raise AnalysisError("mitigation needs at least one checkpoint")
    if latest.accuracy >= threshold:
        return None
    actions = set(actions)
    unknown = actions - {"enable_clauses", "retrain"}
    if unknown or not actions:
        raise ConfigurationError(f"unknown mitigation actions {sorted(unknown)}")
    if clauses_max is None:
        clauses_max = history.config.get("machine", {}).get("num_clauses_max")
    at = latest.online_iteration_index
    if "retrain" in actions:
        return Event(at, "retrain", clauses_max if "enable_clauses" in actions else None)
    return Event(at, "set_active_clauses", clauses_max)


def run_schedule(schedule: Schedule, machine: TsetlinMachine, sets: ThreeSets,
                 fault_plan: Optional[FaultPlan] = None,
                 mitigation: Optional[MitigationPolicy] = None,
                 ordering_id: Optional[int] = None, ordering=None) -> RunHistory:
    schedule.validate(machine)
    if fault_plan is not None and fault_plan.dims != machine.shape:
        raise ScheduleError(f"fault plan dims {fault_plan.dims} != machine {machine.shape}")
    system = System(machine, sets, schedule, fault_plan)
    history = RunHistory(
        config={"machine": machine.config.to_dict(), "schedule": schedule.to_dict(),
                "analysis": ANALYSIS_NOTE,
                "mitigation": asdict(mitigation) if mitigation else None},
        ordering_id=ordering_id,
        ordering=tuple(ordering) if ordering is not None else None,
        seed=machine.rng.seed,
    )
    steps_before = machine.train_steps
    policy_fired = False

    def checkpoint(iteration):
        idx = history.num_checkpoints
        for name in schedule.sets_to_analyze:
            try:
                rec = analyze_accuracy(machine, system.view(name), system.fault_plan,
                                       name, iteration, idx)
            except AnalysisError as exc:
                raise AnalysisError(f"checkpoint {idx} (online iteration {iteration}): {exc}") \
                    from None
            history.records.append(rec)

    run_offline_training(machine, system.view("offline"), schedule.offline_epochs,
                         machine.config.s_offline, system.fault_plan)
    checkpoint(0)

    due = {}
    for ev in schedule.events:
        due.setdefault(ev.at_online_iteration, []).append(ev)
    buffer = CyclicBuffer(schedule.buffer_capacity)
    since_checkpoint = 0

    for it in range(1, schedule.online_iterations + 1):
        for ev in due.get(it - 1, ()):
            apply_event(ev, system)
            history.event_log.append({**ev.describe(), "source": "schedule"})
        if system.online_learning:
            online = system.view("online")
            pos = 0
            while pos < len(online) or len(buffer):
                # producer: the online parser fills the ring without stalling
                while not buffer.full and pos < len(online):
                    buffer.push(online[pos])
                    pos += 1
                limit = None
                if schedule.checkpoint_interval is not None:
                    limit = schedule.checkpoint_interval - since_checkpoint
                chunk = buffer.drain(limit)
                X = np.stack([p.features for p in chunk])
                y = np.array([p.label for p in chunk])
                machine.fit(X, y, system.s_online, system.fault_plan)
                since_checkpoint += len(chunk)
                if schedule.checkpoint_interval is not None \
                        and since_checkpoint == schedule.checkpoint_interval:
                    checkpoint(it)
                    since_checkpoint = 0
        if schedule.checkpoint_interval is None:
            checkpoint(it)
        if mitigation is not None and not (mitigation.once and policy_fired):
            ev = mitigation_policy(history, mitigation.threshold, mitigation.actions,
                                   machine.config.num_clauses_max, mitigation.set_id)
            if ev is not None:
                apply_event(ev, system)
                history.event_log.append({**ev.describe(), "source": "policy"})
                policy_fired = True

    history.dropped = buffer.dropped_count
    history.train_steps = machine.train_steps - steps_before
    return history


# ---------------------------------------------------------------- schedule files

_SCHEDULE_KEYS = {
    "offline_epochs": int,
    "online_iterations": int,
    "online_learning": _parse_bool,
    "offline_limit": int,
    "filter_class": int,
    "buffer_capacity": int,
}


def load_schedule(path) -> Schedule:
    """Read ``key = value`` lines plus any number of ``event = AT:ACTION[=VALUE]``.

    Fault-plan events keep their string spec; resolve them with
    :func:`resolve_fault_spec` once the machine dimensions are known.
    """
    kwargs: dict = {"events": []}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep:
                raise ParseError(f"expected key = value, got {line!r}", lineno, path)
            try:
                if key == "event":
                    kwargs["events"].append(parse_event(value))
                elif key == "sets":
                    kwargs["sets_to_analyze"] = tuple(s.strip() for s in value.split(","))
                elif key == "checkpoint_interval":
                    kwargs[key] = None if value == "iteration" else int(value)
                elif key in _SCHEDULE_KEYS:
                    kwargs[key] = None if value == "none" else _SCHEDULE_KEYS[key](value)
                else:
                    raise ParseError(f"unknown key {key!r}")
            except (ParseError, ValueError) as exc:
                raise ParseError(str(exc), lineno, path) from None
    return Schedule(**kwargs)


def dump_schedule(schedule: Schedule) -> str:
    lines = [
        f"offline_epochs = {schedule.offline_epochs}",
        f"online_iterations = {schedule.online_iterations}",
        f"online_learning = {str(schedule.online_learning).lower()}",
        f"offline_limit = {'none' if schedule.offline_limit is None else schedule.offline_limit}",
        f"filter_class = {'none' if schedule.filter_class is None else schedule.filter_class}",
        f"buffer_capacity = {schedule.buffer_capacity}",
        "checkpoint_interval = " + ("iteration" if schedule.checkpoint_interval is None
                                    else str(schedule.checkpoint_interval)),
        "sets = " + ",".join(schedule.sets_to_analyze),
    ]
    for ev in schedule.events:
        spec = f"{ev.at_online_iteration}:{ev.action}"
        if ev.value is not None and not isinstance(ev.value, FaultPlan):
            val = str(ev.value).lower() if isinstance(ev.value, bool) else ev.value
            spec += f"={val}"
        lines.append(f"event = {spec}")
    return "\n".join(lines) + "\n"
