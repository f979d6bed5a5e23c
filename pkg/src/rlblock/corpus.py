"""Labeled record datasets: schema, records, CSV ingestion and ground truth."""

from __future__ import annotations

import csv
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from rlblock.errors import IntegrityError, ParseError, SchemaError

KINDS = ("text", "categorical", "date", "numeric")

_WS = re.compile(r"\s+")


@dataclass(frozen=True)
class FieldSchema:
    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if not self.names:
            raise SchemaError("schema needs at least one field")
        if len(self.names) != len(self.kinds):
            raise SchemaError("schema names and kinds differ in length")
        if any(not name for name in self.names):
            raise SchemaError("field names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise SchemaError(f"duplicate field names in {self.names}")
        for kind in self.kinds:
            if kind not in KINDS:
                raise SchemaError(f"unknown field kind {kind!r}, expected one of {KINDS}")

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"no field named {name!r} in schema {self.names}") from None

    @classmethod
    def from_json(cls, path) -> "FieldSchema":
        """Read ``{"fields": [{"name": ..., "kind": ...}, ...]}``."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        try:
            fields = raw["fields"]
            return cls(tuple(f["name"] for f in fields), tuple(f.get("kind", "text") for f in fields))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"{path}: malformed schema file ({exc})") from None


# RLdata-style files: names plus date of birth split in three fields.
RLDATA_SCHEMA = FieldSchema(
    ("fname_c1", "lname_c1", "by", "bm", "bd"),
    ("text", "text", "date", "date", "date"),
)

NOISY_SCHEMA = FieldSchema(
    ("first_name", "last_name", "gender", "postcode", "city", "phone", "credit_card", "age"),
    ("text", "text", "categorical", "numeric", "text", "numeric", "numeric", "numeric"),
)

SCHEMAS = {"rldata": RLDATA_SCHEMA, "noisy": NOISY_SCHEMA}


def resolve_schema(name_or_path: str) -> FieldSchema:
    if name_or_path in SCHEMAS:
        return SCHEMAS[name_or_path]
    path = Path(name_or_path)
    if not path.exists():
        raise SchemaError(f"unknown schema {name_or_path!r}: not a preset ({', '.join(SCHEMAS)}) or a file")
    return FieldSchema.from_json(path)


@dataclass(frozen=True)
class Record:
    record_id: int
    entity_id: int
    values: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable list of records sharing one schema."""

    schema: FieldSchema
    records: tuple[Record, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        index = {}
        width = len(self.schema)
        for pos, rec in enumerate(self.records):
            if len(rec.values) != width:
                raise SchemaError(
                    f"record {rec.record_id} has {len(rec.values)} values, schema has {width}"
                )
            if rec.record_id in index:
                raise IntegrityError(f"duplicate record_id {rec.record_id}")
            index[rec.record_id] = pos
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return len(self.records)

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and self.records == other.records

    def position(self, record_id: int) -> int:
        return self._index[record_id]

    @cached_property
    def record_ids(self) -> np.ndarray:
        return np.array([r.record_id for r in self.records], dtype=np.int64)

    @cached_property
    def entity_ids(self) -> np.ndarray:
        return np.array([r.entity_id for r in self.records], dtype=np.int64)

    def column(self, name: str) -> list[str]:
        j = self.schema.index(name)
        return [r.values[j] for r in self.records]

    def subset(self, positions: Iterable[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.records[i] for i in positions))


def normalize_value(raw: str, kind: str = "text") -> str:
    """Uppercase, trim and collapse whitespace; dates are zero-padded to width 2."""
    value = _WS.sub(" ", raw.strip()).upper()
    if kind == "date" and value:
        value = value.zfill(2)
    return value


def load_csv(
    path,
    schema: FieldSchema,
    id_column: str | None = "rec_id",
    entity_column: str = "ent_id",
) -> Dataset:
    """Read a comma-separated, UTF-8 file into a :class:`Dataset`.

    When ``id_column`` is absent from the header, record ids fall back to the
    0-based row index. Values are normalized as they are read.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1) from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise ParseError(f"{path}: {exc}", line=1) from None
        col = {name: i for i, name in enumerate(header)}
        if entity_column not in col:
            raise IntegrityError(f"{path}: missing entity column {entity_column!r}")
        missing = [f for f in schema.names if f not in col]
        if missing:
            raise SchemaError(f"{path}: missing field column(s) {', '.join(missing)}")
        id_pos = col.get(id_column) if id_column else None
        ent_pos = col[entity_column]
        field_pos = [col[f] for f in schema.names]
        seen = set()
        row_no = 0
        while True:
            try:
                row = next(reader)
            except StopIteration:
                break
            except (csv.Error, UnicodeDecodeError) as exc:
                raise ParseError(f"{path}: {exc}", line=reader.line_num) from None
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: expected {len(header)} columns, got {len(row)}", line=reader.line_num
                )
            try:
                rid = int(row[id_pos]) if id_pos is not None else row_no
                eid = int(row[ent_pos])
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=reader.line_num) from None
            if rid in seen:
                raise IntegrityError(f"{path}: duplicate record_id {rid} (line {reader.line_num})")
            seen.add(rid)
            values = tuple(
                normalize_value(row[p], kind) for p, kind in zip(field_pos, schema.kinds)
            )
            records.append(Record(rid, eid, values))
            row_no += 1
    return Dataset(schema, tuple(records))


def write_csv(ds: Dataset, path, id_column: str = "rec_id", entity_column: str = "ent_id") -> None:
    from rlblock.io import atomic_open

    with atomic_open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([id_column, entity_column, *ds.schema.names])
        for rec in ds.records:
            writer.writerow([rec.record_id, rec.entity_id, *rec.values])


def entity_groups(entity_ids: Sequence[int]) -> list[list[int]]:
    """Positions grouped by entity, for groups of two or more."""
    groups = defaultdict(list)
    for pos, eid in enumerate(entity_ids):
        groups[eid].append(pos)
    return [g for g in groups.values() if len(g) > 1]


def true_pairs(ds: Dataset) -> set[tuple[int, int]]:
    """All unordered record_id pairs that share an entity_id, as ``(low, high)``."""
    ids = [r.record_id for r in ds.records]
    out = set()
    for group in entity_groups(ds.entity_ids.tolist()):
        for a, b in combinations(group, 2):
            ra, rb = ids[a], ids[b]
            out.add((ra, rb) if ra < rb else (rb, ra))
    return out


def true_pair_positions(ds: Dataset) -> np.ndarray:
    """True pairs as an ``(m, 2)`` array of positions, rows sorted, ``a < b``."""
    rows = [
        pair for group in entity_groups(ds.entity_ids.tolist()) for pair in combinations(group, 2)
    ]
    if not rows:
        return np.empty((0, 2), dtype=np.int64)
    arr = np.array(rows, dtype=np.int64)
    arr.sort(axis=1)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    return arr[order]


def load_labels(path, id_column: str = "rec_id", entity_column: str = "ent_id") -> tuple[np.ndarray, np.ndarray]:
    """Only the record and entity id columns of a labeled CSV, in file order."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    ids, ents = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file", line=1)
        col = {name: i for i, name in enumerate(header)}
        for need in (id_column, entity_column):
            if need not in col:
                raise IntegrityError(f"{path}: missing column {need!r}")
        for row in reader:
            if not row:
                continue
            try:
                ids.append(int(row[col[id_column]]))
                ents.append(int(row[col[entity_column]]))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: {exc}", line=reader.line_num) from None
    ids_arr = np.asarray(ids, dtype=np.int64)
    if len(np.unique(ids_arr)) != len(ids_arr):
        raise IntegrityError(f"{path}: duplicate record ids")
    return ids_arr, np.asarray(ents, dtype=np.int64)
