"""Tsetlin Machine: TA teams, clause evaluation, voting and feedback.

TA state layout: ``states[class, clause, literal]`` with values in
``[0, 2N-1]``. States below ``N`` mean exclude. Literals are the ``F`` input
bits followed by their ``F`` complements. Even clause indices vote positive,
odd ones negative.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigurationError, InputError, QueryError, TrainingError
from .rng import Randomizer

INCLUDE = 1
EXCLUDE = 0
REWARD = "reward"
PENALTY = "penalty"
INFERENCE = "inference"
LEARNING = "learning"
SNAPSHOT_VERSION = 1


# s -> (p_strengthen, p_weaken). Type I strengthens true literals of firing
# clauses with p_strengthen and weakens everything else with p_weaken.
def canonical_mapping(s: float):
    return (s - 1.0) / s, 1.0 / s


def boost_mapping(s: float):
    """True-positive boost: firing clauses always absorb their true literals."""
    return 1.0, 1.0 / s


def inaction_mapping(s: float):
    """Canonical table gated by (s-1)/s, so s=1 issues no Type I feedback."""
    gate = (s - 1.0) / s
    return gate, gate / s


def swapped_mapping(s: float):
    """Weakening is the rare event: s=1 never erodes, only strengthens."""
    return 1.0 / s, (s - 1.0) / s


S_MAPPINGS: dict[str, Callable[[float], tuple]] = {
    "canonical": canonical_mapping,
    "swapped": swapped_mapping,
    "boost": boost_mapping,
    "inaction": inaction_mapping,
}


@dataclass
class TMConfig:
    num_classes_max: int
    num_clauses_max: int
    num_features: int
    num_clauses_active: Optional[int] = None
    ta_half_states: int = 128
    s_offline: float = 1.375
    s_online: float = 1.0
    threshold_T: int = 15
    class_active_mask: Optional[Sequence[bool]] = None
    rng_seed: int = 0
    s_mapping: str = "canonical"

    def __post_init__(self):
        if self.num_clauses_active is None:
            self.num_clauses_active = self.num_clauses_max
        if self.class_active_mask is None:
            self.class_active_mask = (True,) * self.num_classes_max
        self.class_active_mask = tuple(bool(b) for b in self.class_active_mask)
        self.validate()

    def validate(self):
        if self.num_classes_max < 1:
            raise ConfigurationError("num_classes_max must be >= 1")
        if self.num_features < 1:
            raise ConfigurationError("num_features must be >= 1")
        if self.num_clauses_max < 2 or self.num_clauses_max % 2:
            raise ConfigurationError(
                f"num_clauses_max must be a positive even number, got {self.num_clauses_max}")
        _check_clause_count(self.num_clauses_active, self.num_clauses_max)
        _check_class_mask(self.class_active_mask, self.num_classes_max)
        if self.ta_half_states < 1:
            raise ConfigurationError("ta_half_states must be >= 1")
        if int(self.threshold_T) != self.threshold_T or self.threshold_T < 1:
            raise ConfigurationError(f"threshold_T must be a positive integer, got {self.threshold_T}")
        for name in ("s_offline", "s_online"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.s_mapping not in S_MAPPINGS:
            raise ConfigurationError(
                f"unknown s_mapping {self.s_mapping!r}; choose from {sorted(S_MAPPINGS)}")

    @property
    def num_literals(self) -> int:
        return 2 * self.num_features

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_active_mask"] = list(self.class_active_mask)
        return d


def _check_clause_count(k, k_max):
    if k is None or k <= 0 or k % 2 or k > k_max:
        raise ConfigurationError(
            f"active clause count must be even and in (0, {k_max}], got {k}")


def _check_class_mask(mask, k_max):
    if len(mask) != k_max:
        raise ConfigurationError(f"class mask must have {k_max} entries, got {len(mask)}")
    if not any(mask):
        raise ConfigurationError("at least one class must be active")


# ---------------------------------------------------------------- TA primitives


def ta_action(state, N):
    """1 (include) for states at or above ``N``, else 0. Works elementwise."""
    return (np.asarray(state) >= N).astype(np.uint8) if np.ndim(state) else int(state >= N)


def ta_transition(state, N, event):
    """One reward or penalty step, saturating at 0 and 2N-1.

    ``event`` may be a string or a boolean array (True = reward) for
    vectorized use.
    """
    if isinstance(event, str):
        if event not in (REWARD, PENALTY):
            raise ValueError(f"unknown event {event!r}")
        reward = event == REWARD
    else:
        reward = np.asarray(event, dtype=bool)
    state = np.asarray(state)
    include = state >= N
    # reward deepens the current action, penalty moves toward the other one
    up = include == reward
    out = np.clip(np.where(up, state + 1, state - 1), 0, 2 * N - 1)
    return int(out) if out.ndim == 0 else out


def literals_of(x, num_features: Optional[int] = None) -> np.ndarray:
    """Feature bits followed by their complements; accepts one row or a matrix."""
    x = np.asarray(x)
    if num_features is not None and x.shape[-1] != num_features:
        raise InputError(f"expected {num_features} features, got {x.shape[-1]}")
    if x.ndim not in (1, 2):
        raise InputError("datapoint must be a vector or a matrix of rows")
    if x.size and not np.isin(x, (0, 1)).all():
        raise InputError("features must be boolean (0/1)")
    x = x.astype(np.uint8)
    return np.concatenate([x, 1 - x], axis=-1)


def evaluate_clause(literals, actions, mode: str = INFERENCE) -> int:
    literals = np.asarray(literals, dtype=bool)
    actions = np.asarray(actions, dtype=bool)
    if literals.shape != actions.shape:
        raise InputError("literals and actions must have equal length")
    if not actions.any():
        return 1 if mode == LEARNING else 0
    return int(literals[actions].all())


def feedback_probability(v: int, T: int, role: str) -> float:
    vc = min(max(v, -T), T)
    if role == "target":
        return (T - vc) / (2.0 * T)
    if role == "negative":
        return (T + vc) / (2.0 * T)
    raise ValueError(f"unknown role {role!r}")


@dataclass
class ClauseTeam:
    ta_states: np.ndarray
    polarity: int  # +1 or -1

    def actions(self, N, and_mask=None, or_mask=None):
        a = self.ta_states >= N
        if and_mask is not None:
            a = (a & (np.asarray(and_mask) != 0)) | (np.asarray(or_mask) != 0)
        return a


def apply_type1(clause: ClauseTeam, literals, clause_output: int, s: float,
                rng: Randomizer, N: int, s_mapping: str = "canonical") -> ClauseTeam:
    """Type I feedback. Consumes one draw per TA from ``rng``."""
    p_str, p_weak = S_MAPPINGS[s_mapping](s)
    lit = np.asarray(literals, dtype=bool)
    u = rng.uniforms(lit.shape[0])
    strengthen = bool(clause_output) & lit
    inc = strengthen & (u < p_str)
    dec = ~strengthen & (u < p_weak)
    new = np.clip(clause.ta_states + inc.astype(np.int32) - dec, 0, 2 * N - 1)
    return replace(clause, ta_states=new.astype(clause.ta_states.dtype))


def apply_type2(clause: ClauseTeam, literals, clause_output: int, N: int,
                actions=None) -> ClauseTeam:
    """Type II feedback: a firing clause includes the excluded literals that are 0."""
    if not clause_output:
        return replace(clause, ta_states=clause.ta_states.copy())
    lit = np.asarray(literals, dtype=bool)
    act = clause.actions(N) if actions is None else np.asarray(actions, dtype=bool)
    inc = ~lit & ~act
    new = np.minimum(clause.ta_states + inc, 2 * N - 1)
    return replace(clause, ta_states=new.astype(clause.ta_states.dtype))


# ---------------------------------------------------------------- machine


@dataclass
class TsetlinMachine:
    config: TMConfig
    states: np.ndarray = field(default=None, repr=False)
    rng: Randomizer = field(default=None, repr=False)
    train_steps: int = 0

    def __post_init__(self):
        cfg = self.config
        shape = (cfg.num_classes_max, cfg.num_clauses_max, cfg.num_literals)
        if self.states is None:
            self.states = np.full(shape, cfg.ta_half_states - 1, dtype=np.int32)
        elif self.states.shape != shape:
            raise ConfigurationError(f"state array shape {self.states.shape} != {shape}")
        if self.rng is None:
            self.rng = Randomizer(cfg.rng_seed)
        self._no_fault = (np.ones(shape, dtype=np.uint8), np.zeros(shape, dtype=np.uint8))

    # -- shape and activity

    @property
    def shape(self):
        return self.states.shape

    @property
    def N(self) -> int:
        return self.config.ta_half_states

    @property
    def active_classes(self) -> np.ndarray:
        return np.flatnonzero(self.config.class_active_mask).astype(np.int64)

    @property
    def num_clauses_active(self) -> int:
        return self.config.num_clauses_active

    def set_active_clauses(self, k: int):
        _check_clause_count(k, self.config.num_clauses_max)
        self.config.num_clauses_active = int(k)
        return self

    def set_active_classes(self, mask):
        mask = _as_mask(mask, self.config.num_classes_max)
        _check_class_mask(mask, self.config.num_classes_max)
        self.config.class_active_mask = mask
        return self

    def enable_class(self, class_id: int):
        mask = list(self.config.class_active_mask)
        if not 0 <= class_id < len(mask):
            raise ConfigurationError(f"class {class_id} outside 0..{len(mask) - 1}")
        mask[class_id] = True
        return self.set_active_classes(mask)

    def reset(self, classes=None):
        """Return TA states (of ``classes``, default all) to initialization."""
        idx = slice(None) if classes is None else list(classes)
        self.states[idx] = self.N - 1
        return self

    # -- inference

    def _masks(self, fault_plan):
        if fault_plan is None:
            return self._no_fault
        return fault_plan.masks(self.shape)

    def clause(self, class_id: int, j: int) -> ClauseTeam:
        return ClauseTeam(self.states[class_id, j].copy(), 1 if j % 2 == 0 else -1)

    def clause_outputs(self, class_id, x, fault_plan=None, mode=INFERENCE) -> np.ndarray:
        self._check_class(class_id)
        lits = literals_of(x, self.config.num_features).astype(bool)
        C = self.num_clauses_active
        am, om = self._masks(fault_plan)
        act = kernels.effective_actions(self.states[class_id, :C], am[class_id, :C],
                                        om[class_id, :C], self.N)
        fire = ~np.any(act & ~lits, axis=1)
        if mode == INFERENCE:
            fire &= act.any(axis=1)
        return fire.astype(np.uint8)

    def class_sum(self, class_id, x, fault_plan=None, mode=INFERENCE) -> int:
        out = self.clause_outputs(class_id, x, fault_plan, mode).astype(np.int64)
        return int(out[0::2].sum() - out[1::2].sum())

    def class_sums(self, X, fault_plan=None, backend=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X))
        lits = literals_of(X, self.config.num_features)
        am, om = self._masks(fault_plan)
        return kernels.class_sums(self.states, am, om, self.active_classes,
                                  self.num_clauses_active, self.N, lits, backend)

    def predict(self, X, fault_plan=None, backend=None) -> np.ndarray:
        active = self.active_classes
        if len(active) == 0:
            raise ConfigurationError("no active classes")
        sums = self.class_sums(X, fault_plan, backend)[:, active]
        # argmax returns the first maximum, i.e. the lowest active class index
        return active[np.argmax(sums, axis=1)]

    def classify(self, x, fault_plan=None) -> int:
        return int(self.predict(np.asarray(x)[None, :], fault_plan)[0])

    # -- learning

    def feedback_probabilities(self, s: float):
        return S_MAPPINGS[self.config.s_mapping](s)

    def fit(self, X, y, s: Optional[float] = None, fault_plan=None, epochs: int = 1,
            backend=None):
        """``epochs`` passes of train_step over (X, y) in stored order."""
        X = np.atleast_2d(np.asarray(X))
        y = np.atleast_1d(np.asarray(y, dtype=np.int64))
        if X.shape[0] != y.shape[0]:
            raise InputError("X and y lengths differ")
        if len(y) == 0 or epochs == 0:
            return self
        mask = self.config.class_active_mask
        bad = [int(c) for c in np.unique(y) if not (0 <= c < len(mask) and mask[c])]
        if bad:
            raise TrainingError(f"labels {bad} are not active classes")
        s = self.config.s_offline if s is None else s
        if s < 1:
            raise ConfigurationError("s must be >= 1")
        p_str, p_weak = self.feedback_probabilities(s)
        lits = literals_of(X, self.config.num_features)
        if epochs > 1:
            lits = np.tile(lits, (epochs, 1))
            y = np.tile(y, epochs)
        am, om = self._masks(fault_plan)
        self.rng.counter = kernels.train_sequence(
            self.states, am, om, self.active_classes, self.num_clauses_active, self.N,
            int(self.config.threshold_T), p_str, p_weak, lits, y, self.rng.seed,
            self.rng.counter, backend)
        self.train_steps += len(y)
        return self

    def train_step(self, x, label, s: Optional[float] = None, fault_plan=None,
                   backend=None):
        return self.fit(np.asarray(x)[None, :], [label], s, fault_plan, 1, backend)

    # -- utilities

    def _check_class(self, class_id):
        mask = self.config.class_active_mask
        if not (0 <= class_id < len(mask)) or not mask[class_id]:
            raise QueryError(f"class {class_id} is not active")

    def copy(self) -> "TsetlinMachine":
        return TsetlinMachine(replace(self.config), self.states.copy(), self.rng.copy(),
                              self.train_steps)

    def snapshot(self) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "config": self.config.to_dict(),
            "rng": [self.rng.seed, self.rng.counter],
            "train_steps": self.train_steps,
        }

    def save(self, path):
        meta = json.dumps(self.snapshot())
        with open(path, "wb") as fh:
            np.savez(fh, states=self.states, meta=np.array(meta))

    @classmethod
    def load(cls, path) -> "TsetlinMachine":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            states = z["states"].astype(np.int32)
        if meta.get("version") != SNAPSHOT_VERSION:
            raise ConfigurationError(f"unsupported snapshot version {meta.get('version')}")
        cfg = TMConfig(**meta["config"])
        return cls(cfg, states, Randomizer(*meta["rng"]), meta["train_steps"])


def _as_mask(mask, k_max):
    """Accept a bool sequence of length ``k_max`` or an iterable of class ids."""
    mask = list(mask)
    if len(mask) == k_max and all(isinstance(b, (bool, np.bool_)) for b in mask):
        return tuple(bool(b) for b in mask)
    out = [False] * k_max
    for c in mask:
        if not 0 <= int(c) < k_max:
            raise ConfigurationError(f"class {c} outside 0..{k_max - 1}")
        out[int(c)] = True
    return tuple(out)
