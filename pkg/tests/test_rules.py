import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlblock.baselines.rules import (
    NOISY_CRITERIA,
    RLDATA_CRITERIA,
    And,
    Disagree,
    DisagreeCount,
    LevenshteinAtLeast,
    Or,
    PrefixDisagree,
    brute_force_block,
    evaluate_rule,
    is_hashable_rule,
    parse_rule,
    rule_block,
    validate_rule,
)
from rlblock.corpus import NOISY_SCHEMA, RLDATA_SCHEMA, FieldSchema, true_pair_positions
from rlblock.errors import ParameterError, SchemaError
from rlblock.evaluation import score

SEVEN = ("f1", "f2", "f3", "f4", "f5", "f6", "f7")


def test_parse_examples():
    r = parse_rule("dis(a) | dis(b) & lev(c)>=4")
    assert r == Or((Disagree("a"), And((Disagree("b"), LevenshteinAtLeast("c", 4)))))
    assert parse_rule("(dis(a) | dis(b)) & dis_count(3)") == And(
        (Or((Disagree("a"), Disagree("b"))), DisagreeCount(3))
    )
    assert parse_rule("initial(x)") == PrefixDisagree("x", 1)
    assert parse_rule("prefix(by, 3)") == PrefixDisagree("by", 3)
    for bad in ["", "dis(a", "dis(a) |", "foo(a)", "lev(a)>=", "dis(a) dis(b)", "dis_count(x)"]:
        with pytest.raises(ParameterError):
            parse_rule(bad)


def test_str_roundtrip():
    for preset in list(RLDATA_CRITERIA.values()) + list(NOISY_CRITERIA.values()):
        assert parse_rule(str(preset.rule)) == preset.rule


def test_validation():
    with pytest.raises(SchemaError):
        validate_rule(parse_rule("dis(nope)"), RLDATA_SCHEMA)
    with pytest.raises(ParameterError):
        validate_rule(parse_rule("dis_count(6)"), RLDATA_SCHEMA)
    with pytest.raises(ParameterError):
        validate_rule(parse_rule("lev(by)>=0"), RLDATA_SCHEMA)


def test_scalar_examples():
    first_last = RLDATA_CRITERIA["t1c1"].rule
    a = ("ANN", "LEE", "1970", "01", "02")
    b = ("ANN", "LEA", "1970", "01", "02")
    assert evaluate_rule(first_last, a, b, RLDATA_SCHEMA)
    for preset in list(RLDATA_CRITERIA.values()):
        assert not evaluate_rule(preset.rule, a, a, RLDATA_SCHEMA)
    schema7 = FieldSchema(SEVEN, ("text",) * 7)
    x = tuple("ABCDEFG")
    y = ("Z", "Z", "Z") + x[3:]
    assert not evaluate_rule(DisagreeCount(4), x, y, schema7)
    assert evaluate_rule(DisagreeCount(3), x, y, schema7)


def test_empty_values_disagree():
    a = ("", "LEE", "1970", "01", "02")
    b = ("ANN", "LEE", "1970", "01", "02")
    assert evaluate_rule(parse_rule("dis(fname_c1)"), a, b, RLDATA_SCHEMA)
    assert evaluate_rule(parse_rule("initial(fname_c1)"), a, b, RLDATA_SCHEMA)


@pytest.mark.parametrize("name", sorted(RLDATA_CRITERIA))
def test_rldata_presets_match_brute_force(name, small_rldata):
    rule = RLDATA_CRITERIA[name].rule
    assert rule_block(small_rldata, rule) == brute_force_block(small_rldata, rule)
    assert rule_block(small_rldata, rule, method="scan", threads=3) == brute_force_block(small_rldata, rule)


@pytest.mark.parametrize("name", sorted(NOISY_CRITERIA))
def test_noisy_presets_match_brute_force(name, small_noisy):
    rule = NOISY_CRITERIA[name].rule
    assert rule_block(small_noisy, rule) == brute_force_block(small_noisy, rule)


def test_disagree_year_equals_agreeing_pairs(small_rldata):
    got = rule_block(small_rldata, "dis(by)")
    years = small_rldata.column("by")
    n = small_rldata.n
    brute = {(i, j) for i in range(n) for j in range(i + 1, n) if years[i] == years[j]}
    assert got.as_set() == brute
    assert got.info["evaluation"] == "hash"


def test_always_non_match_gives_empty_set(small_rldata):
    # no two records of the subset are identical, so one disagreement always suffices
    keep, seen = [], set()
    for i, r in enumerate(small_rldata.records):
        if r.values not in seen:
            seen.add(r.values)
            keep.append(i)
    ds = small_rldata.subset(keep)
    out = rule_block(ds, "dis_count(1)")
    assert len(out) == 0
    assert score(out, true_pair_positions(ds)).reduction_ratio == 100.0


def test_hash_path_needs_pure_disjunction():
    assert is_hashable_rule(parse_rule("dis(a) | initial(b) | prefix(c,2)"))
    assert not is_hashable_rule(parse_rule("dis(a) & dis(b)"))
    assert not is_hashable_rule(parse_rule("dis(a) | lev(b)>=2"))


_ATOMS = [
    "dis(fname_c1)", "dis(lname_c1)", "dis(by)", "dis(bm)", "dis(bd)", "initial(fname_c1)",
    "prefix(by,3)", "dis_count(2)", "dis_count(4)", "lev(fname_c1)>=2", "lev(lname_c1)>=3",
]

exprs = st.recursive(
    st.sampled_from(_ATOMS),
    lambda inner: st.tuples(inner, st.sampled_from(["&", "|"]), inner).map(lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
    max_leaves=5,
)


@settings(max_examples=40, deadline=None)
@given(exprs)
def test_random_rules_match_brute_force(small_rldata, expr):
    ds = small_rldata.subset(range(80))
    assert rule_block(ds, expr) == brute_force_block(ds, expr)


@settings(max_examples=30, deadline=None)
@given(exprs, st.sampled_from(_ATOMS))
def test_monotone_in_or_and_and(small_rldata, expr, atom):
    ds = small_rldata.subset(range(80))
    base = rule_block(ds, expr).as_set()
    with_or = rule_block(ds, f"({expr}) | {atom}").as_set()
    with_and = rule_block(ds, f"({expr}) & {atom}").as_set()
    assert with_or <= base <= with_and


def test_day_month_year_recall_on_one_error_duplicates(rldata500):
    rep = score(rule_block(rldata500, RLDATA_CRITERIA["t1c9"].rule), true_pair_positions(rldata500))
    assert rep.recall == 100.0


def test_preset_counts():
    assert len(RLDATA_CRITERIA) == 12 and len(NOISY_CRITERIA) == 8
    assert NOISY_CRITERIA["t2c7"].rule == DisagreeCount(len(NOISY_SCHEMA))
