"""Synthetic labeled datasets: sampled originals plus corrupted duplicates.

Randomness comes from per-record substreams keyed on ``(seed, role,
record_id)``, so every record is reproducible on its own and the result does
not depend on the order records are produced in.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import string
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from rlblock.corpus import NOISY_SCHEMA, RLDATA_SCHEMA, Dataset, FieldSchema, Record, normalize_value
from rlblock.editdistance import damerau_levenshtein
from rlblock.errors import ParameterError, SpecError

ERROR_KINDS = ("substitute", "delete", "insert", "transpose", "swap_fields")
CHAR_EDITS = ERROR_KINDS[:4]

_LETTERS = string.ascii_uppercase
_DIGITS = string.digits

# substream roles
_PLAN, _ORIGINAL, _DUPLICATE = 1, 2, 3

Sampler = Union[Sequence[str], Callable[[np.random.Generator], str]]


def _default_weights():
    return {k: (1.0 if k in CHAR_EDITS else 0.0) for k in ERROR_KINDS}


@dataclass(frozen=True)
class CorruptionSpec:
    duplicate_fraction: float
    errors_per_duplicate: int = 1
    max_duplicates_per_original: int = 1
    error_weights: Mapping[str, float] = field(default_factory=_default_weights)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.duplicate_fraction < 1.0:
            raise SpecError(f"duplicate_fraction must be in (0, 1), got {self.duplicate_fraction}")
        if self.errors_per_duplicate < 1:
            raise SpecError("errors_per_duplicate must be >= 1")
        if self.max_duplicates_per_original < 1:
            raise SpecError("max_duplicates_per_original must be >= 1")
        unknown = set(self.error_weights) - set(ERROR_KINDS)
        if unknown:
            raise SpecError(f"unknown error kinds: {sorted(unknown)}")
        weights = list(self.error_weights.values())
        if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
            raise SpecError("error weights must be nonnegative and not all zero")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["error_weights"] = dict(self.error_weights)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "CorruptionSpec":
        d = dict(d)
        if "error_weights" in d:
            weights = {k: 0.0 for k in ERROR_KINDS}
            weights.update(d["error_weights"])
            d["error_weights"] = weights
        try:
            return cls(**d)
        except TypeError as exc:
            raise SpecError(str(exc)) from None


def duplicate_count(n_originals: int, fraction: float) -> int:
    """Smallest ``d`` with ``d >= ceil(fraction * (n_originals + d))``."""
    f = Fraction(fraction).limit_denominator(10**9)
    d = math.ceil(f * n_originals / (1 - f))
    while d < math.ceil(f * (n_originals + d)):
        d += 1
    return d


# -- name pools ---------------------------------------------------------------


@lru_cache(maxsize=None)
def lexicon(name: str) -> tuple[str, ...]:
    text = resources.files("rlblock.data").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class WeightedPool:
    """Values drawn with Zipf weights ``rank ** -exponent`` (list order is rank)."""

    values: tuple
    exponent: float = 1.0

    def __call__(self, rng: np.random.Generator) -> str:
        w = _zipf_weights(len(self.values), self.exponent)
        return self.values[int(rng.choice(len(self.values), p=w))]


@lru_cache(maxsize=64)
def _zipf_weights(size: int, exponent: float) -> np.ndarray:
    w = np.arange(1, size + 1, dtype=float) ** -exponent
    return w / w.sum()


# Exponents chosen so two random records share a first name (or a last name)
# with probability ~1.3%, the rate implied by name-based criteria on RLdata10000.
FORENAME_EXPONENT = 0.699
SURNAME_EXPONENT = 0.852


def _birth_date(rng):
    lo = dt.date(1920, 1, 1).toordinal()
    hi = dt.date(1999, 12, 31).toordinal()
    return dt.date.fromordinal(int(rng.integers(lo, hi + 1)))


def _digits(count: int, lead: str = ""):
    def sample(rng):
        return lead + "".join(_DIGITS[i] for i in rng.integers(0, 10, size=count - len(lead)))

    return sample


def rldata_pool() -> dict:
    # by/bm/bd are filled from one shared birth date, see _sample_original
    return {
        "fname_c1": WeightedPool(lexicon("forenames"), FORENAME_EXPONENT),
        "lname_c1": WeightedPool(lexicon("surnames"), SURNAME_EXPONENT),
    }


def noisy_pool() -> dict:
    return {
        "first_name": WeightedPool(lexicon("forenames"), FORENAME_EXPONENT),
        "last_name": WeightedPool(lexicon("surnames"), SURNAME_EXPONENT),
        "gender": lambda rng: "MF"[int(rng.integers(2))],
        "postcode": _digits(5),
        "city": WeightedPool(lexicon("cities")),
        "phone": _digits(10, lead="0"),
        "credit_card": _digits(16),
        "age": lambda rng: str(int(rng.integers(18, 91))),
    }


def alphabet_for(kind: str) -> str:
    return _DIGITS if kind in ("date", "numeric") else _LETTERS


# -- corruption ---------------------------------------------------------------


def corrupt_value(
    value: str,
    kind: str,
    rng: np.random.Generator,
    alphabet: str = _LETTERS,
    position: int | None = None,
    char: str | None = None,
) -> str:
    """Apply one character edit at one position.

    ``kind`` is one of substitute, delete, insert, transpose. Empty values
    always receive an insertion; transposing a value with no two distinct
    adjacent characters falls back to a substitution.
    """
    if kind not in CHAR_EDITS:
        raise ParameterError(f"not a character edit: {kind!r}")
    if not value:
        kind = "insert"
    if kind == "transpose":
        spots = [i for i in range(len(value) - 1) if value[i] != value[i + 1]]
        if not spots:
            kind = "substitute"
        else:
            i = position if position is not None else spots[int(rng.integers(len(spots)))]
            return value[:i] + value[i + 1] + value[i] + value[i + 2 :]
    if kind == "insert":
        i = position if position is not None else int(rng.integers(len(value) + 1))
        c = char if char is not None else alphabet[int(rng.integers(len(alphabet)))]
        return value[:i] + c + value[i:]
    i = position if position is not None else int(rng.integers(len(value)))
    if kind == "delete":
        return value[:i] + value[i + 1 :]
    if char is None:
        options = [c for c in alphabet if c != value[i]]
        char = options[int(rng.integers(len(options)))]
    return value[:i] + char + value[i + 1 :]


def _apply_error(values: list, schema: FieldSchema, error: str, rng) -> None:
    nf = len(schema)
    if error == "swap_fields":
        pairs = [(a, b) for a in range(nf) for b in range(a + 1, nf) if values[a] != values[b]]
        if pairs:
            a, b = pairs[int(rng.integers(len(pairs)))]
            values[a], values[b] = values[b], values[a]
            return
        error = "substitute"
    j = int(rng.integers(nf))
    kind = schema.kinds[j]
    before = values[j]
    # normalization may undo or inflate an edit (zero-padded dates); redraw until it is a single edit
    for _ in range(100):
        after = normalize_value(corrupt_value(before, error, rng, alphabet_for(kind)), kind)
        if after != before and damerau_levenshtein(before, after) == 1:
            values[j] = after
            return
    raise SpecError(f"could not apply {error} to field {schema.names[j]!r} value {before!r}")


def _sample_original(schema: FieldSchema, pool: Mapping[str, Sampler], rng) -> tuple[str, ...]:
    out = []
    birth = None
    for name, kind in zip(schema.names, schema.kinds):
        source = pool.get(name)
        if source is None and kind == "date" and name in ("by", "bm", "bd"):
            birth = birth or _birth_date(rng)
            raw = str({"by": birth.year, "bm": birth.month, "bd": birth.day}[name])
        elif source is None:
            raise SpecError(f"no name pool entry for field {name!r}")
        elif callable(source):
            raw = source(rng)
        else:
            if not source:
                raise SpecError(f"empty name pool for field {name!r}")
            raw = source[int(rng.integers(len(source)))]
        out.append(normalize_value(raw, kind))
    return tuple(out)


def _make_duplicate(original: tuple, schema: FieldSchema, spec: CorruptionSpec, rng) -> tuple[str, ...]:
    kinds = list(spec.error_weights)
    w = np.array([spec.error_weights[k] for k in kinds], dtype=float)
    w /= w.sum()
    for _ in range(100):
        values = list(original)
        for _ in range(spec.errors_per_duplicate):
            _apply_error(values, schema, kinds[int(rng.choice(len(kinds), p=w))], rng)
        if tuple(values) != original:
            return tuple(values)
    raise SpecError("could not produce a duplicate that differs from its original")


def _substream(seed: int, role: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(role, key)))


def generate(
    n_originals: int,
    schema: FieldSchema,
    name_pool: Mapping[str, Sampler],
    spec: CorruptionSpec,
) -> Dataset:
    """Sample originals, then append corrupted duplicates after them.

    Record ids are positions; each duplicate carries its original's entity id.
    """
    if n_originals < 1:
        raise ParameterError("n_originals must be >= 1")
    d = duplicate_count(n_originals, spec.duplicate_fraction)
    capacity = n_originals * spec.max_duplicates_per_original
    if d > capacity:
        raise SpecError(
            f"{d} duplicates needed but at most {capacity} allowed "
            f"({spec.max_duplicates_per_original} per original)"
        )
    plan = _substream(spec.seed, _PLAN, 0)
    m = spec.max_duplicates_per_original
    slots = np.sort(plan.choice(capacity, size=d, replace=False))
    sources = slots // m  # original of each duplicate, ascending

    records = [
        Record(i, i, _sample_original(schema, name_pool, _substream(spec.seed, _ORIGINAL, i)))
        for i in range(n_originals)
    ]
    for q, o in enumerate(sources.tolist()):
        rid = n_originals + q
        rng = _substream(spec.seed, _DUPLICATE, rid)
        records.append(Record(rid, o, _make_duplicate(records[o].values, schema, spec, rng)))
    return Dataset(schema, tuple(records))


# -- presets ------------------------------------------------------------------

PRESETS = {
    "rldata500-analog": dict(n_originals=450, schema="rldata", duplicate_fraction=0.10,
                             errors_per_duplicate=1, max_duplicates_per_original=1),
    "rldata10000-analog": dict(n_originals=9000, schema="rldata", duplicate_fraction=0.10,
                               errors_per_duplicate=1, max_duplicates_per_original=1),
    "noisy10": dict(n_originals=9000, schema="noisy", duplicate_fraction=0.10,
                    errors_per_duplicate=5, max_duplicates_per_original=5),
    "noisy30": dict(n_originals=7000, schema="noisy", duplicate_fraction=0.30,
                    errors_per_duplicate=5, max_duplicates_per_original=5),
    "noisy50": dict(n_originals=5000, schema="noisy", duplicate_fraction=0.50,
                    errors_per_duplicate=5, max_duplicates_per_original=5),
}

_SCHEMA_BY_NAME = {"rldata": (RLDATA_SCHEMA, rldata_pool), "noisy": (NOISY_SCHEMA, noisy_pool)}


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything needed to regenerate a dataset; serializes to a small JSON file."""

    n_originals: int
    schema: str
    corruption: CorruptionSpec

    @classmethod
    def preset(cls, name: str, seed: int = 0, n_originals: int | None = None) -> "GeneratorConfig":
        if name not in PRESETS:
            raise ParameterError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        p = dict(PRESETS[name])
        n = p.pop("n_originals") if n_originals is None else n_originals
        p.pop("n_originals", None)
        schema = p.pop("schema")
        return cls(n, schema, CorruptionSpec(seed=seed, **p))

    def with_size(self, total: int, seed: int) -> "GeneratorConfig":
        """Same corruption settings, about ``total`` records, another seed."""
        f = self.corruption.duplicate_fraction
        n_orig = max(1, int(round(total * (1 - f))))
        spec = CorruptionSpec(**{**self.corruption.to_dict(), "seed": seed})
        return GeneratorConfig(n_orig, self.schema, spec)

    def to_dict(self) -> dict:
        return {"n_originals": self.n_originals, "schema": self.schema,
                "corruption": self.corruption.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "GeneratorConfig":
        try:
            return cls(int(d["n_originals"]), d.get("schema", "rldata"),
                       CorruptionSpec.from_dict(d["corruption"]))
        except KeyError as exc:
            raise SpecError(f"generator config missing {exc}") from None

    @classmethod
    def from_json(cls, path) -> "GeneratorConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def build(self) -> Dataset:
        if self.schema not in _SCHEMA_BY_NAME:
            raise SpecError(f"unknown schema {self.schema!r}")
        schema, pool = _SCHEMA_BY_NAME[self.schema]
        return generate(self.n_originals, schema, pool(), self.corruption)
