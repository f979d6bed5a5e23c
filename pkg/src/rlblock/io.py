"""File helpers: atomic writes and the pair/partition CSV formats."""

from __future__ import annotations

import contextlib
import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from rlblock.errors import ParseError

OUT_DIR_ENV = "RLBLOCK_OUT_DIR"


@contextlib.contextmanager
def atomic_open(path, mode="w"):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": ""}
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_json(obj, path) -> None:
    with atomic_open(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_text(text: str, path) -> None:
    with atomic_open(path) as fh:
        fh.write(text)


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def write_two_column(path, header: tuple[str, str], left, right) -> None:
    with atomic_open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(zip(np.asarray(left).tolist(), np.asarray(right).tolist()))


def read_two_column(path) -> tuple[list[str], np.ndarray]:
    """Read an integer two-column CSV with a header row."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise ParseError(f"{path}: expected a two-column header", line=1)
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: expected 2 columns, got {len(row)}", line=reader.line_num)
            try:
                rows.append((int(row[0]), int(row[1])))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=reader.line_num) from None
    arr = np.array(rows, dtype=np.int64).reshape(-1, 2)
    return header, arr
