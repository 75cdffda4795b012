"""Datasets, booleanization, block cross-validation and the online ring buffer.

Canonical dataset file::

    F=16 C=3
    0110100011110000,2
    ...

one row per datapoint, ``F`` characters in ``{0,1}``, a comma and the label.
"""
from __future__ import annotations

import csv
import itertools
import math
from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, ParseError


class Datapoint(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # (n, F) uint8
    y: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.uint8)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, 0)
        y = np.asarray(self.y, dtype=np.int64)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y lengths differ")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return int(self.y.shape[0])

    def __getitem__(self, i) -> Datapoint:
        return Datapoint(self.X[i], int(self.y[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def num_features(self) -> int:
        return int(self.X.shape[1])

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.num_classes)

    def head(self, n: Optional[int]) -> "Dataset":
        return self if n is None else self.take(np.arange(min(n, len(self))))

    @classmethod
    def concat(cls, parts) -> "Dataset":
        parts = list(parts)
        return cls(np.concatenate([p.X for p in parts]),
                   np.concatenate([p.y for p in parts]), parts[0].num_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.num_classes)


# ---------------------------------------------------------------- file IO


def load_dataset(path):
    """Parse a canonical dataset file; returns ``(dataset, manifest)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty dataset file", 1, path)
    manifest = _parse_header(lines[0], path)
    F, C = manifest["F"], manifest["C"]
    X, y = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        bits, sep, label = line.partition(",")
        if not sep:
            raise ParseError("missing ',<label>'", lineno, path)
        if len(bits) != F:
            raise ParseError(f"row has {len(bits)} features, header says F={F}", lineno, path)
        if set(bits) - {"0", "1"}:
            raise ParseError("features must be 0/1 characters", lineno, path)
        try:
            lab = int(label)
        except ValueError:
            raise ParseError(f"bad label {label!r}", lineno, path) from None
        if not 0 <= lab < C:
            raise ParseError(f"label {lab} outside 0..{C - 1}", lineno, path)
        X.append([b == "1" for b in bits])
        y.append(lab)
    if not y:
        raise ParseError("dataset has no rows", 2, path)
    return Dataset(np.array(X, dtype=np.uint8), np.array(y), C), manifest


def _parse_header(line, path):
    fields = {}
    for tok in line.split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise ParseError(f"bad header token {tok!r}", 1, path)
        try:
            fields[key] = int(val)
        except ValueError:
            raise ParseError(f"bad header value {tok!r}", 1, path) from None
    if set(fields) != {"F", "C"} or fields["F"] < 1 or fields["C"] < 1:
        raise ParseError("header must be 'F=<int> C=<int>'", 1, path)
    return fields


def save_dataset(dataset: Dataset, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(format_dataset(dataset))


def format_dataset(dataset: Dataset) -> str:
    rows = [f"F={dataset.num_features} C={dataset.num_classes}"]
    for x, lab in zip(dataset.X, dataset.y):
        rows.append("".join("1" if b else "0" for b in x) + f",{lab}")
    return "\n".join(rows) + "\n"


def load_raw_csv(path):
    """Real-valued feature CSV with the label in the last column; header optional."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ParseError("empty raw file", 1, path)
    start = 0
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        start = 1
    values, labels = [], []
    width = None
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if width is None:
            width = len(row)
        if len(row) != width:
            raise ParseError(f"row has {len(row)} columns, expected {width}", lineno, path)
        try:
            values.append([float(v) for v in row[:-1]])
            labels.append(int(row[-1]))
        except ValueError:
            raise ParseError(f"non-numeric value in {row!r}", lineno, path) from None
    if not values:
        raise ParseError("raw file has no data rows", start + 1, path)
    return np.array(values), np.array(labels, dtype=np.int64)


def booleanize_quantile(raw, bins_per_feature: int, thresholds=None):
    """Thermometer-encode each column against its ``q/(bins+1)`` quantiles.

    Returns ``(bits, thresholds)``. Bit ``j`` of a feature is
    ``value > threshold_j``; a constant column maps to all zeros.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if bins_per_feature < 1:
        raise ConfigurationError("bins_per_feature must be >= 1")
    if thresholds is None:
        q = np.arange(1, bins_per_feature + 1) / (bins_per_feature + 1)
        thresholds = np.quantile(raw, q, axis=0).T  # (features, bins)
    bits = raw[:, :, None] > thresholds[None, :, :]
    return bits.reshape(raw.shape[0], -1).astype(np.uint8), thresholds


def booleanize_file(raw_path, out_path, bins: int, shuffle_seed: Optional[int] = None):
    raw, labels = load_raw_csv(raw_path)
    bits, _ = booleanize_quantile(raw, bins)
    ds = Dataset(bits, labels, int(labels.max()) + 1)
    if shuffle_seed is not None:
        from .rng import Randomizer
        ds = ds.take(Randomizer(shuffle_seed).permutation(len(ds)))
    save_dataset(ds, out_path)
    return ds


def bundled_dataset_path(name: str = "iris.txt"):
    return resources.files("tmonline") / "datasets" / name


# ---------------------------------------------------------------- cross-validation


@dataclass(frozen=True)
class BlockStore:
    blocks: tuple
    block_len: int

    def __len__(self):
        return len(self.blocks)


@dataclass(frozen=True)
class SetAllocation:
    offline_len: int
    validation_len: int
    online_len: int

    @property
    def total(self):
        return self.offline_len + self.validation_len + self.online_len

    def check(self, store: BlockStore):
        n = len(store) * store.block_len
        if self.total != n:
            raise ConfigurationError(f"allocation sums to {self.total}, dataset has {n}")
        for name in ("offline_len", "validation_len", "online_len"):
            if getattr(self, name) % store.block_len:
                raise ConfigurationError(
                    f"{name}={getattr(self, name)} is not a multiple of block_len={store.block_len}")


class ThreeSets(NamedTuple):
    offline: Dataset
    validation: Dataset
    online: Dataset


SET_NAMES = ThreeSets._fields


def partition_blocks(dataset: Dataset, block_len: int) -> BlockStore:
    n = len(dataset)
    if block_len <= 0 or n % block_len:
        raise ConfigurationError(f"block_len={block_len} does not divide dataset size {n}")
    blocks = tuple(dataset.take(np.arange(i, i + block_len)) for i in range(0, n, block_len))
    return BlockStore(blocks, block_len)


def materialize_sets(store: BlockStore, ordering, alloc: SetAllocation) -> ThreeSets:
    alloc.check(store)
    ordering = tuple(ordering)
    if sorted(ordering) != list(range(len(store))):
        raise ConfigurationError(f"{ordering} is not a permutation of {len(store)} blocks")
    sizes = [alloc.offline_len, alloc.validation_len, alloc.online_len]
    out, pos = [], 0
    for size in sizes:
        nb = size // store.block_len
        out.append(Dataset.concat([store.blocks[b] for b in ordering[pos:pos + nb]]))
        pos += nb
    return ThreeSets(*out)


def enumerate_orderings(num_blocks: int, limit: Optional[int] = None) -> list:
    total = math.factorial(num_blocks)
    if limit is None:
        limit = total
    if limit < 1 or limit > total:
        raise ConfigurationError(f"orderings limit must be in 1..{total}, got {limit}")
    return list(itertools.islice(itertools.permutations(range(num_blocks)), limit))


def filter_class(dataset: Dataset, class_id: Optional[int], enabled: bool = True) -> Dataset:
    if not enabled or class_id is None:
        return dataset
    return dataset.take(np.flatnonzero(dataset.y != class_id))


# ---------------------------------------------------------------- online buffer


class CyclicBuffer:
    """Bounded FIFO between the online data source and the trainer.

    A push into a full buffer overwrites the oldest item and counts a drop,
    so the producer never stalls.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)
        self.dropped_count = 0

    def __len__(self):
        return len(self._items)

    @property
    def full(self) -> bool:
        return len(self._items) == self.capacity

    def push(self, item):
        if self.full:
            self.dropped_count += 1
        self._items.append(item)
        return self

    def pop(self):
        return self._items.popleft() if self._items else None

    def drain(self, limit: Optional[int] = None) -> list:
        n = len(self._items) if limit is None else min(limit, len(self._items))
        return [self._items.popleft() for _ in range(n)]


ring_push = CyclicBuffer.push
ring_pop = CyclicBuffer.pop
