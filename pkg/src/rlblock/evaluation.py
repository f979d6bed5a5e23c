"""Recall and reduction ratio of blocking outputs, plus scaling and
sensitivity sweeps."""

from __future__ import annotations

import csv
import io as _io
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from rlblock.corpus import Dataset, true_pair_positions
from rlblock.errors import ParameterError
from rlblock.partition import BlockingPartition, CandidatePairSet, encode_pairs


def candidate_pairs_of(partition: BlockingPartition) -> tuple[int, Iterator[tuple[int, int]]]:
    """Number of within-block pairs and a lazy iterator over them."""
    sizes = partition.sizes().astype(np.int64)
    count = int((sizes * (sizes - 1) // 2).sum())

    def pairs():
        for block in partition.blocks():
            yield from itertools.combinations(sorted(block.tolist()), 2)

    return count, pairs()


@dataclass
class EvalReport:
    recall: float
    reduction_ratio: float
    candidate_pairs: int
    true_pairs: int
    true_pairs_preserved: int
    n: int
    block_size_histogram: dict | None = None
    timings: dict = field(default_factory=dict)
    method: str = ""
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.block_size_histogram is not None:
            d["block_size_histogram"] = {str(k): v for k, v in self.block_size_histogram.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        return format_table([self])


def _truth_keys(truth, n: int) -> np.ndarray:
    if isinstance(truth, np.ndarray):
        arr = truth.reshape(-1, 2).astype(np.int64)
    else:
        arr = np.asarray(sorted(truth), dtype=np.int64).reshape(-1, 2)
    if len(arr) and (arr.min() < 0 or arr.max() >= n or (arr[:, 0] == arr[:, 1]).any()):
        raise ParameterError("true pairs must be distinct positions below n")
    return np.unique(encode_pairs(arr[:, 0], arr[:, 1], n))


def score(
    result: BlockingPartition | CandidatePairSet,
    truth,
    n: int | None = None,
    method: str = "",
    params: Mapping | None = None,
    seed: int | None = None,
) -> EvalReport:
    """Recall and RR in percent. ``truth`` holds position pairs (set or ``(m, 2)`` array)."""
    if n is None:
        n = result.n
    if n != result.n:
        raise ParameterError(f"result covers {result.n} records, expected {n}")
    keys = _truth_keys(truth, n)
    total = n * (n - 1) // 2
    if isinstance(result, BlockingPartition):
        lab = result.assignment
        preserved = int((lab[keys // n] == lab[keys % n]).sum())
        cand, _ = candidate_pairs_of(result)
        sizes, counts = np.unique(result.sizes(), return_counts=True)
        hist = {int(s): int(c) for s, c in zip(sizes, counts)}
    elif isinstance(result, CandidatePairSet):
        preserved = int(np.isin(keys, result.keys).sum())
        cand = len(result)
        hist = None
    else:
        raise TypeError(f"cannot score {type(result).__name__}")
    recall = 100.0 if len(keys) == 0 else 100.0 * preserved / len(keys)
    rr = 100.0 if total == 0 else 100.0 * (1.0 - cand / total)
    return EvalReport(
        recall=recall,
        reduction_ratio=rr,
        candidate_pairs=int(cand),
        true_pairs=int(len(keys)),
        true_pairs_preserved=preserved,
        n=int(n),
        block_size_histogram=hist,
        timings=dict(result.timings),
        method=method,
        params=dict(params or {}),
        seed=seed,
    )


def score_dataset(result, ds: Dataset, **kw) -> EvalReport:
    return score(result, true_pair_positions(ds), ds.n, **kw)


def format_table(reports: Sequence[EvalReport], labels: Sequence[str] | None = None) -> str:
    """Aligned text table: one row per report with recall and RR."""
    if labels is None:
        labels = [r.method or "-" for r in reports]
    rows = [("", "Blocking", "Recall (%)", "RR (%)", "Pairs")]
    for i, (lab, r) in enumerate(zip(labels, reports), 1):
        rows.append((f"{i}.", lab, f"{r.recall:.2f}", f"{r.reduction_ratio:.2f}", str(r.candidate_pairs)))
    widths = [max(len(row[c]) for row in rows) for c in range(5)]
    lines = []
    for row in rows:
        cells = [row[0].rjust(widths[0]), row[1].ljust(widths[1])]
        cells += [row[c].rjust(widths[c]) for c in (2, 3, 4)]
        lines.append("  ".join(cells).rstrip())
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


# -- sweeps -------------------------------------------------------------------


def loglog_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or (x <= 0).any() or (y <= 0).any():
        raise ParameterError("need at least two positive points for a log-log fit")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def size_seed(seed: int, size: int) -> int:
    """Dataset seed used for one size of a scaling sweep."""
    return int(np.random.SeedSequence(seed, spawn_key=(0x5343, size)).generate_state(1)[0])


@dataclass
class ScalingResult:
    rows: list  # dicts: n, wall_time, vocab_size, plus stage timings
    time_slope: float
    vocab_slope: float

    def to_csv(self) -> str:
        keys = ["n", "wall_time", "vocab_size"]
        extra = sorted({k for r in self.rows for k in r} - set(keys))
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys + extra, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r)
        return buf.getvalue()

    def summary(self) -> str:
        return f"time slope {self.time_slope:.3f}\nvocab slope {self.vocab_slope:.3f}\n"


def scaling_sweep(generator, method, sizes: Sequence[int], seed: int = 0, repeats: int = 1) -> ScalingResult:
    """Generate a dataset per size, run ``method`` end to end and time it.

    ``generator`` is a :class:`~rlblock.synthgen.GeneratorConfig` and
    ``method`` a :class:`~rlblock.methods.MethodConfig`. With ``repeats > 1``
    the fastest run per size is kept.
    """
    from rlblock.methods import run_method

    sizes = list(sizes)
    if len(sizes) < 2 or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ParameterError("sizes must be strictly ascending with at least two entries")
    rows = []
    for n in sizes:
        ds = generator.with_size(n, size_seed(seed, n)).build()
        best = None
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            out = run_method(ds, method, seed=seed)
            wall = time.perf_counter() - t0
            if best is None or wall < best[0]:
                best = (wall, out)
        wall, out = best
        row = {"n": ds.n, "wall_time": wall, "vocab_size": out.info.get("vocab_size", 0)}
        row.update({f"t_{k}": v for k, v in out.timings.items()})
        rows.append(row)
    ns = [r["n"] for r in rows]
    vocab = [r["vocab_size"] for r in rows]
    vs = loglog_slope(ns, vocab) if min(vocab) > 0 else float("nan")
    return ScalingResult(rows, loglog_slope(ns, [r["wall_time"] for r in rows]), vs)


def expand_grid(grid: Mapping[str, Sequence]) -> list[dict]:
    """Cartesian product in key order, last key varying fastest."""
    if not grid:
        raise ParameterError("sensitivity grid is empty")
    keys = list(grid)
    for k in keys:
        if not len(grid[k]):
            raise ParameterError(f"grid axis {k!r} is empty")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def sensitivity_sweep(ds: Dataset, method, grid: Mapping[str, Sequence], seed: int = 0, threads: int = 1):
    """One report per grid point, ordered by grid index.

    ``method`` is a :class:`~rlblock.methods.MethodConfig` whose parameters
    are overridden point by point.
    """
    from rlblock.methods import MethodConfig, run_method

    points = expand_grid(grid)
    configs = [MethodConfig(method.name, {**method.params, **pt}) for pt in points]
    for c in configs:
        c.validate(ds.schema)
    truth = true_pair_positions(ds)

    def one(cfg):
        out = run_method(ds, cfg, seed=seed)
        return score(out, truth, ds.n, method=cfg.name, params=cfg.params, seed=seed)

    if threads <= 1:
        reports = [one(c) for c in configs]
    else:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(one, configs))
    return list(zip(points, reports))


def sensitivity_csv(results) -> str:
    keys = list(results[0][0]) if results else []
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys + ["recall", "reduction_ratio", "candidate_pairs"])
    for pt, rep in results:
        w.writerow([pt[k] for k in keys] + [f"{rep.recall:.4f}", f"{rep.reduction_ratio:.4f}", rep.candidate_pairs])
    return buf.getvalue()
