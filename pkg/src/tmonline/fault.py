"""Stuck-at fault injection on TA action outputs.

Each TA output passes through ``(action AND and_bit) OR or_bit``. A plan
stores only the non-default masks; every other TA is fault-free
(``and_bit=1, or_bit=0``).
"""
from __future__ import annotations

import csv
from typing import NamedTuple

import numpy as np

from .errors import AddressError, ParseError
from .rng import Randomizer

STUCK_AT_0 = "stuck_at_0"
STUCK_AT_1 = "stuck_at_1"
TABLE_HEADER = ["class", "clause", "literal", "and_bit", "or_bit"]


class FaultMask(NamedTuple):
    and_bit: int = 1
    or_bit: int = 0

    @property
    def fault_free(self) -> bool:
        return self.and_bit == 1 and self.or_bit == 0


FAULT_FREE = FaultMask()


def apply_mask(action, mask: FaultMask):
    return (action & mask.and_bit) | mask.or_bit


class FaultPlan:
    """Addressable AND/OR forcing bits for every TA of a machine of shape ``dims``."""

    def __init__(self, dims, masks=None):
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) != 3:
            raise ValueError("dims must be (classes, clauses, literals)")
        self._masks: dict[tuple, FaultMask] = {}
        self._cache = None
        for addr, m in (masks or {}).items():
            self.set_fault(addr, m)

    def __len__(self):
        return len(self._masks)

    def __iter__(self):
        return iter(sorted(self._masks.items()))

    def __eq__(self, other):
        return isinstance(other, FaultPlan) and self.dims == other.dims \
            and self._masks == other._masks

    def __repr__(self):
        return f"FaultPlan(dims={self.dims}, faults={len(self)})"

    def _check(self, address):
        address = tuple(int(a) for a in address)
        if len(address) != 3 or not all(0 <= a < d for a, d in zip(address, self.dims)):
            raise AddressError(f"TA address {address} outside {self.dims}")
        return address

    def get(self, address) -> FaultMask:
        return self._masks.get(self._check(address), FAULT_FREE)

    def set_fault(self, address, mask):
        address = self._check(address)
        mask = FaultMask(int(bool(mask[0])), int(bool(mask[1])))
        if mask.fault_free:
            self._masks.pop(address, None)
        else:
            self._masks[address] = mask
        self._cache = None
        return self

    def clear_all(self):
        self._masks.clear()
        self._cache = None
        return self

    def masks(self, shape=None):
        """Dense ``(and_mask, or_mask)`` uint8 arrays of the plan's shape."""
        if shape is not None and tuple(shape) != self.dims:
            raise AddressError(f"plan dims {self.dims} do not match machine {tuple(shape)}")
        if self._cache is None:
            am = np.ones(self.dims, dtype=np.uint8)
            om = np.zeros(self.dims, dtype=np.uint8)
            for (c, j, k), m in self._masks.items():
                am[c, j, k] = m.and_bit
                om[c, j, k] = m.or_bit
            self._cache = (am, om)
        return self._cache

    def copy(self) -> "FaultPlan":
        return FaultPlan(self.dims, dict(self._masks))

    def save(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TABLE_HEADER)
            for (c, j, k), m in self:
                w.writerow([c, j, k, m.and_bit, m.or_bit])

    @classmethod
    def load(cls, path, dims) -> "FaultPlan":
        plan = cls(dims)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != TABLE_HEADER:
            raise ParseError(f"expected header {','.join(TABLE_HEADER)}", 1, path)
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                c, j, k, a, o = (int(v) for v in row)
            except ValueError:
                raise ParseError(f"bad fault row {row!r}", lineno, path) from None
            if a not in (0, 1) or o not in (0, 1):
                raise ParseError("mask bits must be 0 or 1", lineno, path)
            plan.set_fault((c, j, k), (a, o))
        return plan


def generate_even_spread_plan(fraction: float, kind: str, dims, seed: int = 0) -> FaultPlan:
    """Fault ``round(fraction * total)`` TAs spread evenly over clauses.

    Every clause (across all classes) receives ``floor`` or ``ceil`` of its
    share; which clauses take the remainder and which literals are hit is
    drawn from ``seed``.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    if kind == STUCK_AT_0:
        mask = FaultMask(0, 0)
    elif kind == STUCK_AT_1:
        mask = FaultMask(1, 1)
    else:
        raise ValueError(f"unknown fault kind {kind!r}")
    plan = FaultPlan(dims)
    K, C, L = plan.dims
    n_clauses = K * C
    total = int(np.floor(fraction * K * C * L + 0.5))
    if total == 0:
        return plan
    rng = Randomizer(seed)
    per_clause = np.full(n_clauses, total // n_clauses, dtype=np.int64)
    per_clause[rng.permutation(n_clauses)[: total % n_clauses]] += 1
    for flat, count in enumerate(per_clause):
        if count == 0:
            continue
        c, j = divmod(flat, C)
        for k in np.sort(rng.permutation(L)[:count]):
            plan.set_fault((c, j, int(k)), mask)
    return plan
