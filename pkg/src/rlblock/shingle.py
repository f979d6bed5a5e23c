"""Character shingles, the token vocabulary and its IDF weights."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from rlblock.corpus import Dataset, Record
from rlblock.errors import ParameterError

# Unit separator: never produced by normalization, so no shingle silently
# spans two fields without containing it.
FIELD_SEP = "\x1f"


@dataclass(frozen=True)
class ShingleBag:
    counts: dict
    k: int

    def support(self) -> frozenset:
        return frozenset(self.counts)

    def total(self) -> int:
        return sum(self.counts.values())

    def __len__(self):
        return len(self.counts)


@dataclass(frozen=True, eq=False)
class Vocabulary:
    tokens: tuple[str, ...]
    doc_freq: np.ndarray
    idf: np.ndarray
    n: int

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self):
        return len(self.tokens)


def record_string(values: Sequence[str]) -> str:
    return FIELD_SEP.join(values)


def shingle_string(text: str, k: int) -> ShingleBag:
    if k < 1:
        raise ParameterError(f"shingle length must be >= 1, got {k}")
    if not text:
        return ShingleBag({}, k)
    if len(text) < k:
        return ShingleBag({text: 1}, k)
    return ShingleBag(dict(Counter(text[i : i + k] for i in range(len(text) - k + 1))), k)


def shingle_record(rec: Record | Sequence[str], k: int) -> ShingleBag:
    values = rec.values if isinstance(rec, Record) else rec
    return shingle_string(record_string(values), k)


def shingle_dataset(ds: Dataset, k: int) -> list[ShingleBag]:
    return [shingle_record(rec, k) for rec in ds.records]


def build_vocabulary(bags: Sequence[ShingleBag], n: int | None = None) -> Vocabulary:
    """Tokens in first-appearance order, with document frequencies and ``ln(n / N_w)``."""
    if n is None:
        n = len(bags)
    if n != len(bags) or n < 1:
        raise ParameterError(f"need n == len(bags) >= 1, got n={n}, {len(bags)} bags")
    index: dict[str, int] = {}
    freq: list[int] = []
    for bag in bags:
        for tok in bag.counts:
            i = index.get(tok)
            if i is None:
                index[tok] = len(freq)
                freq.append(1)
            else:
                freq[i] += 1
    doc_freq = np.array(freq, dtype=np.int64)
    idf = np.log(n / doc_freq) if len(freq) else np.empty(0)
    return Vocabulary(tuple(index), doc_freq, idf, n)


def count_matrix(bags: Sequence[ShingleBag], vocab: Vocabulary) -> sp.csr_matrix:
    """Records x tokens matrix of shingle counts."""
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for bag in bags:
        for tok, c in bag.counts.items():
            indices.append(vocab.index[tok])
            data.append(c)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(bags), len(vocab)),
    )


def incidence_matrix(bags: Sequence[ShingleBag], vocab: Vocabulary) -> sp.csc_matrix:
    """Binary tokens x records matrix: entry (w, j) is 1 iff token w is in bag j."""
    counts = count_matrix(bags, vocab)
    inc = sp.csc_matrix(
        (np.ones_like(counts.data, dtype=np.uint8), counts.indices, counts.indptr),
        shape=(len(vocab), len(bags)),
    )
    return inc


def jaccard(a: ShingleBag, b: ShingleBag) -> float:
    if a.k != b.k:
        raise ParameterError(f"cannot compare bags with k={a.k} and k={b.k}")
    sa, sb = a.counts.keys(), b.counts.keys()
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return len(sa & sb) / union
