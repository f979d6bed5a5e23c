"""Blocking outputs: partitions of records and surviving pair sets.

Both types index records by position ``0..n-1`` in their dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def canonical_labels(labels) -> np.ndarray:
    """Relabel blocks 0, 1, 2, ... in order of each block's lowest position."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return np.empty(0, dtype=np.int64)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.ravel()]


@dataclass(eq=False)
class BlockingPartition:
    """Assignment of every record to exactly one block.

    Block ids are canonical: contiguous from 0 and numbered by first
    appearance, so equal partitions compare and serialize identically.
    """

    assignment: np.ndarray
    timings: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.assignment = canonical_labels(self.assignment)
        self.assignment.setflags(write=False)

    @classmethod
    def from_blocks(cls, blocks, n: int | None = None, timings=None) -> "BlockingPartition":
        blocks = [list(b) for b in blocks]
        if n is None:
            n = sum(len(b) for b in blocks)
        labels = np.full(n, -1, dtype=np.int64)
        for bid, members in enumerate(blocks):
            if len(members) and (labels[members] != -1).any():
                raise ValueError("blocks overlap")
            labels[members] = bid
        if (labels == -1).any():
            raise ValueError("blocks do not cover every record")
        return cls(labels, dict(timings or {}))

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def num_blocks(self) -> int:
        return int(self.assignment.max()) + 1 if self.n else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_blocks)

    def blocks(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)

    def __eq__(self, other):
        if not isinstance(other, BlockingPartition):
            return NotImplemented
        return np.array_equal(self.assignment, other.assignment)

    def __repr__(self):
        return f"BlockingPartition(n={self.n}, blocks={self.num_blocks})"


def encode_pairs(a, b, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return lo * n + hi


def decode_pairs(keys, n: int) -> tuple[np.ndarray, np.ndarray]:
    keys = np.asarray(keys, dtype=np.int64)
    return keys // n, keys % n


@dataclass(eq=False)
class CandidatePairSet:
    """Unordered record pairs that survive a blocking rule.

    Stored as sorted unique keys ``low * n + high``.
    """

    n: int
    keys: np.ndarray
    timings: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = np.unique(np.asarray(self.keys, dtype=np.int64))
        if keys.size:
            lo, hi = decode_pairs(keys, self.n)
            if (lo >= hi).any() or hi.max() >= self.n:
                raise ValueError("pair keys must encode low < high < n")
        keys.setflags(write=False)
        self.keys = keys

    @classmethod
    def from_pairs(cls, pairs, n: int) -> "CandidatePairSet":
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
        arr = arr.reshape(-1, 2)
        if (arr[:, 0] == arr[:, 1]).any():
            raise ValueError("self-pairs are not allowed")
        return cls(n, encode_pairs(arr[:, 0], arr[:, 1], n))

    def __len__(self):
        return len(self.keys)

    def pairs(self) -> np.ndarray:
        lo, hi = decode_pairs(self.keys, self.n)
        return np.stack([lo, hi], axis=1)

    def as_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.pairs()}

    def __eq__(self, other):
        if not isinstance(other, CandidatePairSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.keys, other.keys)

    def __repr__(self):
        return f"CandidatePairSet(n={self.n}, pairs={len(self)})"
