import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlblock.errors import ParseError
from rlblock.io import atomic_open, read_two_column, write_two_column
from rlblock.partition import BlockingPartition, CandidatePairSet, canonical_labels, decode_pairs, encode_pairs


def test_canonical_labels():
    assert canonical_labels([7, 7, 3, 9, 3]).tolist() == [0, 0, 1, 2, 1]
    assert BlockingPartition([5, 1, 5]) == BlockingPartition([0, 1, 0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=30))
def test_partition_properties(labels):
    p = BlockingPartition(labels)
    assert p.num_blocks == len(set(labels))
    assert p.sizes().sum() == len(labels)
    assert sorted(np.concatenate(p.blocks()).tolist()) == list(range(len(labels)))
    assert p.assignment.max() == p.num_blocks - 1
    with pytest.raises(ValueError):
        p.assignment[0] = 3


def test_from_blocks_checks():
    with pytest.raises(ValueError):
        BlockingPartition.from_blocks([[0, 1], [1]])
    with pytest.raises(ValueError):
        BlockingPartition.from_blocks([[0]], n=2)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 1000), st.data())
def test_pair_encoding_roundtrip(n, data):
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1).filter(lambda v: v != a))
    lo, hi = decode_pairs(encode_pairs([a], [b], n), n)
    assert (lo[0], hi[0]) == (min(a, b), max(a, b))


def test_pair_set():
    ps = CandidatePairSet.from_pairs([(3, 1), (1, 3), (0, 2)], 4)
    assert len(ps) == 2 and ps.as_set() == {(0, 2), (1, 3)}
    with pytest.raises(ValueError):
        CandidatePairSet.from_pairs([(1, 1)], 4)
    with pytest.raises(ValueError):
        CandidatePairSet(4, [4 * 3 + 1])


def test_two_column_roundtrip(tmp_path):
    p = tmp_path / "x.csv"
    write_two_column(p, ("a", "b"), [1, 2], [3, 4])
    header, arr = read_two_column(p)
    assert header == ["a", "b"] and arr.tolist() == [[1, 3], [2, 4]]
    p.write_text("a,b\n1,x\n")
    with pytest.raises(ParseError):
        read_two_column(p)
    with pytest.raises(ParseError):
        read_two_column(tmp_path / "missing.csv")


def test_atomic_open_leaves_old_file_on_failure(tmp_path):
    p = tmp_path / "out.txt"
    p.write_text("old")
    with pytest.raises(RuntimeError):
        with atomic_open(p) as fh:
            fh.write("new")
            raise RuntimeError("boom")
    assert p.read_text() == "old"
    assert [f.name for f in tmp_path.iterdir()] == ["out.txt"]
