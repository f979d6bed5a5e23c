"""Minhash signatures and LSH banding.

Hash functions are ``h_i(x) = (a_i * x + b_i) mod P`` with ``P = 2**61 - 1``,
evaluated on scrambled token indices. Token indices are consecutive integers,
and a linear hash over a run of consecutive integers is far from min-wise
independent, so each index first goes through a keyed 32-bit bijection.
All arithmetic stays in ``uint64`` by splitting the product into 32-bit
halves and folding with the Mersenne identity ``2**61 = 1 (mod P)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from rlblock.errors import ParameterError

MERSENNE_61 = np.uint64((1 << 61) - 1)
_LOW32 = np.uint64(0xFFFFFFFF)
_LOW29 = np.uint64((1 << 29) - 1)


def _fold(v: np.ndarray) -> np.ndarray:
    # v < 2**64 -> v mod P in [0, P]; callers fold again where needed
    return (v & MERSENNE_61) + (v >> np.uint64(61))


def mulmod61(a, x) -> np.ndarray:
    """``(a * x) mod (2**61 - 1)`` for ``a < 2**61`` and ``x < 2**32``."""
    a = np.asarray(a, dtype=np.uint64)
    x = np.asarray(x, dtype=np.uint64)
    a_hi = a >> np.uint64(32)  # < 2**29
    a_lo = a & _LOW32
    low = _fold(a_lo * x)  # a_lo * x < 2**64
    t = a_hi * x  # < 2**61; contributes t * 2**32
    t_hi = t >> np.uint64(29)
    t_lo = t & _LOW29
    high = t_hi + (t_lo << np.uint64(32))  # t * 2**32 = t_hi * 2**61 + t_lo * 2**32
    out = _fold(low + _fold(high))
    out = np.where(out >= MERSENNE_61, out - MERSENNE_61, out)
    return out


_M32 = np.uint64(0xFFFFFFFF)


def scramble32(x, key: int) -> np.ndarray:
    """Keyed bijection on 32-bit integers (murmur3 finalizer applied to ``x ^ key``)."""
    h = (np.asarray(x, dtype=np.uint64) ^ np.uint64(key)) & _M32
    h ^= h >> np.uint64(16)
    h = (h * np.uint64(0x85EBCA6B)) & _M32
    h ^= h >> np.uint64(13)
    h = (h * np.uint64(0xC2B2AE35)) & _M32
    h ^= h >> np.uint64(16)
    return h


@dataclass(frozen=True, eq=False)
class MinHashFamily:
    a: np.ndarray
    b: np.ndarray
    seed: int
    key: int = 0

    @classmethod
    def create(cls, p: int, seed: int) -> "MinHashFamily":
        if p < 1:
            raise ParameterError(f"need at least one hash function, got p={p}")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x4D48,)))
        prime = int(MERSENNE_61)
        a = rng.integers(1, prime, size=p, dtype=np.uint64)
        b = rng.integers(0, prime, size=p, dtype=np.uint64)
        key = int(rng.integers(0, 1 << 32, dtype=np.uint64))
        return cls(a, b, seed, key)

    @property
    def p(self) -> int:
        return len(self.a)

    def hash_values(self, x) -> np.ndarray:
        """``p x len(x)`` matrix of ``h_i(x_j)`` for token indices ``x < 2**32``."""
        x = scramble32(x, self.key)
        out = mulmod61(self.a[:, None], x[None, :]) + self.b[:, None]
        out = np.where(out >= MERSENNE_61, out - MERSENNE_61, out)
        return out


def minhash_signatures(incidence: sp.spmatrix, family: MinHashFamily) -> np.ndarray:
    """Reduce a tokens x records binary matrix to a ``p x n`` signature matrix.

    A record with no tokens gets the sentinel value ``P`` in every row.
    """
    inc = sp.csc_matrix(incidence)
    w, n = inc.shape
    sig = np.full((family.p, n), MERSENNE_61, dtype=np.uint64)
    if n == 0 or inc.nnz == 0:
        return sig
    token_hashes = family.hash_values(np.arange(w, dtype=np.uint64))
    indptr = inc.indptr
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    starts = indptr[nonempty]
    for i in range(family.p):
        sig[i, nonempty] = np.minimum.reduceat(token_hashes[i, inc.indices], starts)
    return sig


def band_slices(p: int, b: int) -> list[slice]:
    """``b`` contiguous bands of ``p // b`` rows; leftover rows join the last band."""
    if not 1 <= b <= p:
        raise ParameterError(f"need 1 <= bands <= permutations, got b={b}, p={p}")
    r = p // b
    cuts = [i * r for i in range(b)] + [p]
    return [slice(cuts[i], cuts[i + 1]) for i in range(b)]


_P1 = np.uint64(0x9E3779B185EBCA87)
_P2 = np.uint64(0xC2B2AE3D27D4EB4F)
_P3 = np.uint64(0x165667B19E3779F9)
_P4 = np.uint64(0x85EBCA77C2B2AE63)
_P5 = np.uint64(0x27D4EB2F165667C5)


def _rotl(x: np.ndarray, r: int) -> np.ndarray:
    return (x << np.uint64(r)) | (x >> np.uint64(64 - r))


def band_keys(sig: np.ndarray, rows: slice) -> np.ndarray:
    """64-bit bucket key of every column's sub-signature within one band.

    XXH64 word mixing over the band's rows followed by its avalanche step,
    vectorized across columns (uint64 arithmetic wraps).
    """
    block = np.asarray(sig[rows], dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = np.full(block.shape[1], _P5 + np.uint64(8 * block.shape[0]), dtype=np.uint64)
        for v in block:
            h ^= _rotl(v * _P2, 31) * _P1
            h = _rotl(h, 27) * _P1 + _P4
        h ^= h >> np.uint64(33)
        h *= _P2
        h ^= h >> np.uint64(29)
        h *= _P3
        h ^= h >> np.uint64(32)
    return h


def bucket_pairs(keys: np.ndarray) -> np.ndarray:
    """Encoded pairs (``lo * n + hi``) of columns that share a bucket key.

    Works bucket by bucket rather than pair by pair: a bucket with ``s``
    members emits ``s * (s - 1) / 2`` pairs and singleton buckets emit
    nothing. Buckets of equal size are handled together as one array.
    """
    n = len(keys)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    bounds = np.flatnonzero(np.diff(sorted_keys)) + 1
    starts = np.concatenate([[0], bounds])
    sizes = np.diff(np.concatenate([starts, [n]]))
    chunks = []
    for s in np.unique(sizes[sizes > 1]).tolist():
        first = starts[sizes == s]
        members = np.sort(order[first[:, None] + np.arange(s)], axis=1).astype(np.int64)
        iu, ju = np.triu_indices(s, k=1)
        chunks.append((members[:, iu] * n + members[:, ju]).ravel())
    if not chunks:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(chunks)


def band_and_bucket(sig: np.ndarray, b: int) -> np.ndarray:
    """Candidate edges from LSH banding, as an ``(m, 2)`` array with ``lo < hi``.

    Two columns are joined when their sub-signatures land in the same bucket
    in at least one band. Edges are deduplicated and sorted.
    """
    p, n = sig.shape
    slices = band_slices(p, b)
    parts = [bucket_pairs(band_keys(sig, rows)) for rows in slices]
    keys = np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
    return np.stack([keys // max(n, 1), keys % max(n, 1)], axis=1).astype(np.int64)
