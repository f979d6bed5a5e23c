import itertools
import random

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_band_edges
from rlblock.errors import ParameterError
from rlblock.minhash import (
    MERSENNE_61,
    MinHashFamily,
    band_and_bucket,
    band_keys,
    band_slices,
    bucket_pairs,
    minhash_signatures,
    mulmod61,
    scramble32,
)

P = (1 << 61) - 1


def test_mulmod_against_big_ints():
    rng = random.Random(3)
    a = [rng.randrange(1, P) for _ in range(500)] + [P - 1, 1]
    x = [rng.randrange(0, 1 << 32) for _ in range(500)] + [(1 << 32) - 1, 0]
    got = mulmod61(np.array(a, dtype=np.uint64), np.array(x, dtype=np.uint64))
    assert got.tolist() == [(ai * xi) % P for ai, xi in zip(a, x)]


def _fmix32(x, key):
    h = (x ^ key) & 0xFFFFFFFF
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & 0xFFFFFFFF
    return h ^ (h >> 16)


def test_hash_values_against_big_ints():
    fam = MinHashFamily.create(5, seed=1)
    xs = np.arange(50, dtype=np.uint64)
    h = fam.hash_values(xs)
    for i in range(5):
        a, b = int(fam.a[i]), int(fam.b[i])
        assert h[i].tolist() == [(a * _fmix32(x, fam.key) + b) % P for x in range(50)]


def test_scramble_is_a_bijection():
    x = np.arange(1 << 16, dtype=np.uint64)
    assert len(np.unique(scramble32(x, 12345))) == len(x)


def _incidence(columns, w):
    rows, cols = [], []
    for j, toks in enumerate(columns):
        for t in toks:
            rows.append(t)
            cols.append(j)
    return sp.csc_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(w, len(columns)))


def test_signature_is_minimum_over_support():
    fam = MinHashFamily.create(7, seed=2)
    cols = [[0, 3, 5], [1], [], [0, 3, 5]]
    sig = minhash_signatures(_incidence(cols, 6), fam)
    h = fam.hash_values(np.arange(6))
    for j, toks in enumerate(cols):
        expect = h[:, toks].min(axis=1) if toks else np.full(7, MERSENNE_61)
        assert np.array_equal(sig[:, j], expect)
    assert np.array_equal(sig[:, 0], sig[:, 3])


def test_single_record():
    sig = minhash_signatures(_incidence([[0, 1]], 2), MinHashFamily.create(4, 0))
    assert sig.shape == (4, 1)
    assert len(band_and_bucket(sig, 2)) == 0


def test_agreement_concentrates_at_half():
    # supports of size 30 sharing 20 tokens: Jaccard 20 / 40 = 0.5
    cols = [list(range(30)), list(range(10, 40))]
    inc = _incidence(cols, 40)
    inside = 0
    for seed in range(200):
        sig = minhash_signatures(inc, MinHashFamily.create(1000, seed))
        inside += 0.45 <= (sig[:, 0] == sig[:, 1]).mean() <= 0.55
    assert inside >= 198


def test_band_slices():
    assert band_slices(10, 3) == [slice(0, 3), slice(3, 6), slice(6, 10)]
    assert band_slices(4, 4) == [slice(i, i + 1) for i in range(4)]
    for bad in (0, 11):
        with pytest.raises(ParameterError):
            band_slices(10, bad)


def _random_sig(rng, p, n, levels=3):
    return rng.integers(0, levels, size=(p, n)).astype(np.uint64)


def test_limiting_band_counts():
    rng = np.random.default_rng(0)
    sig = _random_sig(rng, 6, 30)
    one_row = {tuple(e) for e in band_and_bucket(sig, 6).tolist()}
    assert one_row == {(i, j) for i, j in itertools.combinations(range(30), 2) if (sig[:, i] == sig[:, j]).any()}
    whole = {tuple(e) for e in band_and_bucket(sig, 1).tolist()}
    assert whole == {(i, j) for i, j in itertools.combinations(range(30), 2) if (sig[:, i] == sig[:, j]).all()}


def test_band_and_bucket_matches_brute_force():
    rng = np.random.default_rng(1)
    sig = _random_sig(rng, 100, 100, levels=2)
    got = {tuple(e) for e in band_and_bucket(sig, 20).tolist()}
    assert got == brute_band_edges(sig, 20)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_banding_invariant_to_record_order(seed, b):
    rng = np.random.default_rng(seed)
    n = 25
    sig = _random_sig(rng, 8, n, levels=2)
    perm = rng.permutation(n)
    base = {tuple(e) for e in band_and_bucket(sig, b).tolist()}
    shuffled = band_and_bucket(sig[:, perm], b)
    mapped = {tuple(sorted((int(perm[i]), int(perm[j])))) for i, j in shuffled.tolist()}
    assert mapped == base


def test_bucket_loop_emits_sum_of_bucket_squares():
    keys = np.array([5, 5, 5, 9, 9, 1, 7, 7, 7, 7], dtype=np.uint64)
    pairs = bucket_pairs(keys)
    sizes = np.unique(keys, return_counts=True)[1]
    assert len(pairs) == sum(s * (s - 1) // 2 for s in sizes)
    assert len(np.unique(pairs)) == len(pairs)


def test_band_keys_equal_for_equal_subsignatures():
    sig = np.array([[1, 1, 2], [3, 3, 3]], dtype=np.uint64)
    k = band_keys(sig, slice(0, 2))
    assert k[0] == k[1] != k[2]


def test_family_seeded():
    a = MinHashFamily.create(10, 4)
    b = MinHashFamily.create(10, 4)
    c = MinHashFamily.create(10, 5)
    assert np.array_equal(a.a, b.a) and not np.array_equal(a.a, c.a)
    assert (a.a >= 1).all() and (a.a < MERSENNE_61).all()


M64 = (1 << 64) - 1


def _xxh64_words(words):
    """XXH64 (seed 0) of a buffer shorter than 32 bytes made of 64-bit words, on Python ints."""
    p1, p2, p3, p4, p5 = (0x9E3779B185EBCA87, 0xC2B2AE3D27D4EB4F, 0x165667B19E3779F9,
                          0x85EBCA77C2B2AE63, 0x27D4EB2F165667C5)

    def rotl(x, r):
        return ((x << r) | (x >> (64 - r))) & M64

    h = (p5 + 8 * len(words)) & M64
    for w in words:
        h ^= (rotl((w * p2) & M64, 31) * p1) & M64
        h = (rotl(h, 27) * p1 + p4) & M64
    h ^= h >> 33
    h = (h * p2) & M64
    h ^= h >> 29
    h = (h * p3) & M64
    return h ^ (h >> 32)


def test_band_keys_against_reference_xxh64():
    xxhash = pytest.importorskip("xxhash")
    rng = np.random.default_rng(3)
    sig = rng.integers(0, 1 << 61, size=(7, 40), dtype=np.uint64)
    for rows in (slice(0, 1), slice(1, 4), slice(4, 7)):
        got = band_keys(sig, rows)
        for j in range(sig.shape[1]):
            words = [int(v) for v in sig[rows, j]]
            assert int(got[j]) == _xxh64_words(words)
            # band of at most 3 words stays under 32 bytes, where the word loop is the whole algorithm
            assert int(got[j]) == xxhash.xxh64_intdigest(sig[rows, j].astype("<u8").tobytes())
