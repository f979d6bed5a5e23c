import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import levenshtein_full
from rlblock.editdistance import damerau_levenshtein, levenshtein

words = st.text(alphabet="ABCD", max_size=8)


def test_examples():
    assert levenshtein("KITTEN", "SITTING") == 3
    assert levenshtein("", "ABC") == 3
    assert levenshtein("AB", "BA") == 2
    assert damerau_levenshtein("AB", "BA") == 1
    assert damerau_levenshtein("CA", "ABC") == 2


@settings(max_examples=300, deadline=None)
@given(words, words)
def test_matches_full_matrix(a, b):
    assert levenshtein(a, b) == levenshtein_full(a, b)
    assert levenshtein(a, b) == levenshtein(b, a)
    assert levenshtein(a, a) == 0


@settings(max_examples=300, deadline=None)
@given(words, words, st.integers(1, 5))
def test_cutoff_is_exact_below_and_capped_at(a, b, d):
    full = levenshtein_full(a, b)
    assert levenshtein(a, b, cutoff=d) == min(full, d)


@settings(max_examples=200, deadline=None)
@given(words, words, words)
def test_triangle_inequality(a, b, c):
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
    assert damerau_levenshtein(a, c) <= damerau_levenshtein(a, b) + damerau_levenshtein(b, c)


@settings(max_examples=200, deadline=None)
@given(words, words)
def test_damerau_bounded_by_levenshtein(a, b):
    assert damerau_levenshtein(a, b) <= levenshtein(a, b)
    assert damerau_levenshtein(a, b) == damerau_levenshtein(b, a)


def test_single_transposition_costs_one():
    for s in ["ABCD", "XYZ", "HELLO"]:
        for i in range(len(s) - 1):
            t = s[:i] + s[i + 1] + s[i] + s[i + 2 :]
            if t != s:
                assert damerau_levenshtein(s, t) == 1
