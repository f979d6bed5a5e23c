"""Field-comparison blocking rules.

A rule is a boolean expression that *declares a pair a non-match*; the pairs
it does not declare survive as candidates. Expressions are written as::

    expr   := term ("|" term)*
    term   := factor ("&" factor)*
    factor := atom | "(" expr ")"
    atom   := dis(FIELD) | dis_count(M) | lev(FIELD)>=D
            | initial(FIELD) | prefix(FIELD, N)

``&`` binds tighter than ``|``. ``dis`` is inequality of normalized values,
``initial`` and ``prefix`` compare the leading 1 or N characters,
``dis_count(M)`` is true when at least M schema fields disagree and
``lev(F)>=D`` when the Levenshtein distance of the two values is at least D.
"""

from __future__ import annotations

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from rlblock.corpus import NOISY_SCHEMA, RLDATA_SCHEMA, Dataset, FieldSchema, Record
from rlblock.editdistance import levenshtein
from rlblock.errors import ParameterError, SchemaError
from rlblock.partition import CandidatePairSet


@dataclass(frozen=True)
class Disagree:
    field: str

    def __str__(self):
        return f"dis({self.field})"


@dataclass(frozen=True)
class PrefixDisagree:
    field: str
    length: int

    def __str__(self):
        if self.length == 1:
            return f"initial({self.field})"
        return f"prefix({self.field},{self.length})"


def InitialDisagree(field: str) -> PrefixDisagree:
    return PrefixDisagree(field, 1)


@dataclass(frozen=True)
class DisagreeCount:
    min_fields: int

    def __str__(self):
        return f"dis_count({self.min_fields})"


@dataclass(frozen=True)
class LevenshteinAtLeast:
    field: str
    distance: int

    def __str__(self):
        return f"lev({self.field})>={self.distance}"


@dataclass(frozen=True)
class And:
    children: tuple

    def __str__(self):
        return " & ".join(_wrap(c, Or) for c in self.children)


@dataclass(frozen=True)
class Or:
    children: tuple

    def __str__(self):
        return " | ".join(str(c) for c in self.children)


Rule = Union[Disagree, PrefixDisagree, DisagreeCount, LevenshteinAtLeast, And, Or]
_EQUALITY_ATOMS = (Disagree, PrefixDisagree)


def _wrap(node, kind) -> str:
    return f"({node})" if isinstance(node, kind) else str(node)


def any_of(*children) -> Rule:
    return children[0] if len(children) == 1 else Or(tuple(children))


def all_of(*children) -> Rule:
    return children[0] if len(children) == 1 else And(tuple(children))


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(>=|[()&|,]|[A-Za-z_][A-Za-z0-9_]*|\d+)")


def _tokenize(text: str) -> list[str]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParameterError(f"cannot parse rule at position {pos}: {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            want = expected or "a token"
            raise ParameterError(f"rule {self.text!r}: expected {want}, got {tok!r}")
        self.i += 1
        return tok

    def integer(self) -> int:
        tok = self.take()
        if not tok.isdigit():
            raise ParameterError(f"rule {self.text!r}: expected an integer, got {tok!r}")
        return int(tok)

    def name(self) -> str:
        tok = self.take()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            raise ParameterError(f"rule {self.text!r}: expected a field name, got {tok!r}")
        return tok

    def expr(self):
        parts = [self.term()]
        while self.peek() == "|":
            self.take()
            parts.append(self.term())
        return any_of(*parts)

    def term(self):
        parts = [self.factor()]
        while self.peek() == "&":
            self.take()
            parts.append(self.factor())
        return all_of(*parts)

    def factor(self):
        if self.peek() == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        head = self.take()
        self.take("(")
        if head == "dis":
            node = Disagree(self.name())
        elif head == "initial":
            node = InitialDisagree(self.name())
        elif head == "prefix":
            f = self.name()
            self.take(",")
            node = PrefixDisagree(f, self.integer())
        elif head == "dis_count":
            node = DisagreeCount(self.integer())
        elif head == "lev":
            f = self.name()
            self.take(")")
            self.take(">=")
            return LevenshteinAtLeast(f, self.integer())
        else:
            raise ParameterError(f"rule {self.text!r}: unknown atom {head!r}")
        self.take(")")
        return node


def parse_rule(text: str) -> Rule:
    p = _Parser(text)
    if not p.toks:
        raise ParameterError("empty rule expression")
    node = p.expr()
    if p.peek() is not None:
        raise ParameterError(f"rule {text!r}: unexpected {p.peek()!r}")
    return node


def atoms(rule: Rule):
    if isinstance(rule, (And, Or)):
        for c in rule.children:
            yield from atoms(c)
    else:
        yield rule


def validate_rule(rule: Rule, schema: FieldSchema) -> None:
    for atom in atoms(rule):
        f = getattr(atom, "field", None)
        if f is not None and f not in schema.names:
            raise SchemaError(f"rule {rule} uses unknown field {f!r}")
        if isinstance(atom, DisagreeCount) and not 1 <= atom.min_fields <= len(schema):
            raise ParameterError(f"dis_count needs 1..{len(schema)} fields, got {atom.min_fields}")
        if isinstance(atom, LevenshteinAtLeast) and atom.distance < 1:
            raise ParameterError("lev threshold must be >= 1")
        if isinstance(atom, PrefixDisagree) and atom.length < 1:
            raise ParameterError("prefix length must be >= 1")


# -- scalar evaluation --------------------------------------------------------


def evaluate_rule(rule: Rule, a, b, schema: FieldSchema) -> bool:
    """True when ``rule`` declares records ``a`` and ``b`` a non-match."""
    va = a.values if isinstance(a, Record) else tuple(a)
    vb = b.values if isinstance(b, Record) else tuple(b)
    if isinstance(rule, Or):
        return any(evaluate_rule(c, va, vb, schema) for c in rule.children)
    if isinstance(rule, And):
        return all(evaluate_rule(c, va, vb, schema) for c in rule.children)
    if isinstance(rule, DisagreeCount):
        return sum(x != y for x, y in zip(va, vb)) >= rule.min_fields
    j = schema.index(rule.field)
    if isinstance(rule, Disagree):
        return va[j] != vb[j]
    if isinstance(rule, PrefixDisagree):
        return va[j][: rule.length] != vb[j][: rule.length]
    if isinstance(rule, LevenshteinAtLeast):
        return levenshtein(va[j], vb[j], cutoff=rule.distance) >= rule.distance
    raise TypeError(f"not a rule node: {rule!r}")


# -- blocking -----------------------------------------------------------------


def _codes(strings) -> tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(np.asarray(strings, dtype=object).astype(str), return_inverse=True)
    return inv.astype(np.int64), uniq


class _Compiled:
    """Integer-coded columns so each atom is an array comparison."""

    def __init__(self, ds: Dataset, rule: Rule):
        self.rule = rule
        self.schema = ds.schema
        self.values = {}
        self.keys = {}
        for atom in atoms(rule):
            if isinstance(atom, DisagreeCount):
                self.keys.setdefault("*", np.stack([self._key(ds, f, None) for f in ds.schema.names], axis=1))
            elif isinstance(atom, PrefixDisagree):
                self._key(ds, atom.field, atom.length)
            else:
                self._key(ds, atom.field, None)
        self.lev_memo: dict = {}

    def _key(self, ds, f, length):
        if (f, length) not in self.keys:
            col = ds.column(f)
            if length is not None:
                col = [v[:length] for v in col]
            codes, uniq = _codes(col)
            self.keys[(f, length)] = codes
            self.values[(f, length)] = uniq
        return self.keys[(f, length)]

    def declared(self, node, i: int, js: np.ndarray) -> np.ndarray:
        if isinstance(node, (Or, And)):
            is_or = isinstance(node, Or)
            out = np.full(len(js), not is_or)
            pending = np.arange(len(js))
            for child in node.children:
                if not len(pending):
                    break
                res = self.declared(child, i, js[pending])
                if is_or:
                    out[pending[res]] = True
                    pending = pending[~res]
                else:
                    out[pending[~res]] = False
                    pending = pending[res]
            return out
        if isinstance(node, DisagreeCount):
            m = self.keys["*"]
            return (m[js] != m[i]).sum(axis=1) >= node.min_fields
        if isinstance(node, Disagree):
            col = self.keys[(node.field, None)]
            return col[js] != col[i]
        if isinstance(node, PrefixDisagree):
            col = self.keys[(node.field, node.length)]
            return col[js] != col[i]
        col = self.keys[(node.field, None)]
        vals = self.values[(node.field, None)]
        ci = int(col[i])
        uniq, inv = np.unique(col[js], return_inverse=True)
        hits = np.empty(len(uniq), dtype=bool)
        for u, cj in enumerate(uniq.tolist()):
            key = (node.field, node.distance, min(ci, cj), max(ci, cj))
            hit = self.lev_memo.get(key)
            if hit is None:
                hit = levenshtein(vals[ci], vals[cj], cutoff=node.distance) >= node.distance
                self.lev_memo[key] = hit
            hits[u] = hit
        return hits[inv.ravel()]


def is_hashable_rule(rule: Rule) -> bool:
    """A pure OR of equality atoms: survivors are exactly the groups agreeing on every key."""
    parts = rule.children if isinstance(rule, Or) else (rule,)
    return all(isinstance(p, _EQUALITY_ATOMS) for p in parts)


def _hash_block(ds: Dataset, rule: Rule) -> np.ndarray:
    parts = rule.children if isinstance(rule, Or) else (rule,)
    comp = _Compiled(ds, rule)
    cols = [comp.keys[(p.field, getattr(p, "length", None))] for p in parts]
    _, group = np.unique(np.stack(cols, axis=1), axis=0, return_inverse=True)
    group = group.ravel()
    order = np.argsort(group, kind="stable")
    bounds = np.flatnonzero(np.diff(group[order])) + 1
    n = ds.n
    chunks = []
    for members in np.split(order, bounds):
        if len(members) < 2:
            continue
        a, b = np.triu_indices(len(members), k=1)
        chunks.append(members[a] * n + members[b])
    return np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)


def _scan_rows(comp: _Compiled, n: int, rows: range) -> np.ndarray:
    out = []
    for i in rows:
        js = np.arange(i + 1, n)
        if not len(js):
            continue
        keep = ~comp.declared(comp.rule, i, js)
        out.append(i * n + js[keep])
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def rule_block(ds: Dataset, rule: Rule | str, threads: int = 1, method: str = "auto") -> CandidatePairSet:
    """Pairs of ``ds`` (by position) that ``rule`` does not declare non-matches.

    ``method`` is ``"hash"`` (only for pure disjunctions of equality atoms),
    ``"scan"`` (all pairs, chunked over rows across ``threads``) or ``"auto"``.
    """
    if isinstance(rule, str):
        rule = parse_rule(rule)
    validate_rule(rule, ds.schema)
    if method not in ("auto", "hash", "scan"):
        raise ParameterError(f"unknown rule evaluation method {method!r}")
    if method == "hash" and not is_hashable_rule(rule):
        raise ParameterError(f"rule {rule} is not a disjunction of equality atoms")
    t0 = time.perf_counter()
    use_hash = method == "hash" or (method == "auto" and is_hashable_rule(rule))
    n = ds.n
    if use_hash:
        keys = _hash_block(ds, rule)
    else:
        comp = _Compiled(ds, rule)
        threads = max(1, int(threads))
        if threads == 1 or n < 64:
            keys = _scan_rows(comp, n, range(n))
        else:
            # interleave rows so chunks get similar amounts of work
            step = max(1, n // (threads * 8))
            ranges = [range(s, min(n, s + step)) for s in range(0, n, step)]
            with ThreadPoolExecutor(threads) as pool:
                keys = np.concatenate(list(pool.map(lambda r: _scan_rows(comp, n, r), ranges)))
    out = CandidatePairSet(n, keys, {"rule": time.perf_counter() - t0})
    out.info.update(rule=str(rule), evaluation="hash" if use_hash else "scan")
    return out


def brute_force_block(ds: Dataset, rule: Rule | str) -> CandidatePairSet:
    """Reference filter: evaluate the rule on every pair with the scalar evaluator."""
    if isinstance(rule, str):
        rule = parse_rule(rule)
    validate_rule(rule, ds.schema)
    recs = ds.records
    keep = [
        (i, j)
        for i in range(ds.n)
        for j in range(i + 1, ds.n)
        if not evaluate_rule(rule, recs[i], recs[j], ds.schema)
    ]
    return CandidatePairSet.from_pairs(np.asarray(keep, dtype=np.int64).reshape(-1, 2), ds.n)


# -- named criteria -----------------------------------------------------------


@dataclass(frozen=True)
class RulePreset:
    name: str
    label: str
    expression: str
    schema: FieldSchema

    @property
    def rule(self) -> Rule:
        return parse_rule(self.expression)


def _presets(prefix: str, schema: FieldSchema, rows: Sequence[tuple[str, str]]) -> dict:
    return {
        f"{prefix}{i}": RulePreset(f"{prefix}{i}", label, expr, schema)
        for i, (label, expr) in enumerate(rows, 1)
    }


RLDATA_CRITERIA = _presets(
    "t1c",
    RLDATA_SCHEMA,
    [
        ("First OR last name", "dis(fname_c1) | dis(lname_c1)"),
        ("Day OR month OR year of birth", "dis(bd) | dis(bm) | dis(by)"),
        ("Year of birth", "dis(by)"),
        ("Day of birth", "dis(bd)"),
        ("Month of birth", "dis(bm)"),
        ("Decade of birth", "prefix(by,3)"),
        ("First AND last name", "dis(fname_c1) & dis(lname_c1)"),
        (
            "{First AND last name} OR {day AND month AND year of birth}",
            "(dis(fname_c1) & dis(lname_c1)) | (dis(bd) & dis(bm) & dis(by))",
        ),
        ("Day AND month AND year of birth", "dis(bd) & dis(bm) & dis(by)"),
        ("More than three fields", "dis_count(4)"),
        ("Initial of first OR last name", "initial(fname_c1) | initial(lname_c1)"),
        (
            "{More than three fields} OR {Levenshtein >= 4 in first OR last name}",
            "dis_count(4) | lev(fname_c1)>=4 | lev(lname_c1)>=4",
        ),
    ],
)

NOISY_CRITERIA = _presets(
    "t2c",
    NOISY_SCHEMA,
    [
        ("Gender", "dis(gender)"),
        ("City", "dis(city)"),
        ("Postal code", "dis(postcode)"),
        ("First OR last name", "dis(first_name) | dis(last_name)"),
        ("Initial of first OR last name", "initial(first_name) | initial(last_name)"),
        ("First AND last name", "dis(first_name) & dis(last_name)"),
        ("All fields", f"dis_count({len(NOISY_SCHEMA)})"),
        (
            "{All fields} OR {Levenshtein >= 4 in first OR last name}",
            f"dis_count({len(NOISY_SCHEMA)}) | lev(first_name)>=4 | lev(last_name)>=4",
        ),
    ],
)

RULE_PRESETS = {**RLDATA_CRITERIA, **NOISY_CRITERIA}


def preset_rule(name: str) -> Rule:
    try:
        return RULE_PRESETS[name].rule
    except KeyError:
        raise ParameterError(f"unknown rule preset {name!r}; choose from {sorted(RULE_PRESETS)}") from None
