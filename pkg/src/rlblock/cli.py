"""Command line: generate, block, evaluate, sweep, bench, reproduce-tables.

Exit codes: 0 ok, 2 usage, 3 data error, 4 parameter error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from itertools import combinations
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from rlblock.baselines.rules import NOISY_CRITERIA, RLDATA_CRITERIA, rule_block
from rlblock.corpus import (
    NOISY_SCHEMA,
    RLDATA_SCHEMA,
    entity_groups,
    load_csv,
    load_labels,
    resolve_schema,
    true_pair_positions,
    write_csv,
)
from rlblock.errors import DataError, IntegrityError, ParameterError, RLBlockError
from rlblock.evaluation import format_table, scaling_sweep, score, sensitivity_csv, sensitivity_sweep
from rlblock.io import OUT_DIR_ENV, default_out_dir, read_two_column, write_json, write_text, write_two_column
from rlblock.methods import METHOD_PARAMS, METHOD_PRESETS, MethodConfig, run_method
from rlblock.partition import BlockingPartition, CandidatePairSet, encode_pairs
from rlblock.synthgen import PRESETS, GeneratorConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARAM = 0, 2, 3, 4

# flag -> (parameter name, type, help)
_METHOD_FLAGS = {
    "--shingle-k": ("shingle_k", int, "shingle length k (tnn, knn, canopy, tlsh, klsh)"),
    "--permutations": ("permutations", int, "minhash permutations p (tlsh)"),
    "--bands": ("bands", int, "number of bands b (tlsh)"),
    "--max-block": ("max_block", int, "maximum block size t (tlsh)"),
    "--projections": ("projections", int, "random projections p (klsh, canopy)"),
    "--num-blocks": ("num_blocks", int, "number of blocks c (klsh)"),
    "--avg-block-size": ("avg_block_size", float, "target average block size, sets c = ceil(n / A) (klsh)"),
    "--max-iter": ("max_iter", int, "k-means iteration cap (klsh)"),
    "--threshold": ("threshold", float, "growth distance threshold (tnn)"),
    "--kmin": ("kmin", int, "minimum cluster size (knn)"),
    "--t1": ("t1", float, "canopy inclusion distance (canopy)"),
    "--t2": ("t2", float, "canopy removal distance, <= t1 (canopy)"),
    "--canopy-distance": ("distance", str, "cheap distance: projection or tfidf (canopy)"),
    "--randomize-bases": ("randomize_bases", int, "pick canopy bases at random with this seed (canopy)"),
    "--rule-preset": ("preset", str, "named rule, t1c1..t1c12 or t2c1..t2c8 (rule)"),
    "--rule-expr": ("expr", str, "rule expression, e.g. 'dis(by) | dis(bm)' (rule)"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"rlblock: usage error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker and BLAS thread cap (default: available CPUs)")
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default: ${OUT_DIR_ENV} or the current directory)")


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="labeled CSV with rec_id, ent_id and field columns")
    p.add_argument("--schema", default="rldata",
                   help="schema name (rldata, noisy) or JSON schema file (default rldata)")


def _add_method(p):
    p.add_argument("--method", choices=sorted(METHOD_PARAMS), default=None,
                   help="blocking method")
    p.add_argument("--preset", choices=sorted(METHOD_PRESETS), default=None,
                   help="method preset with recommended parameters; other flags override it")
    for flag, (_, typ, text) in _METHOD_FLAGS.items():
        p.add_argument(flag, type=typ, default=None, help=text)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rlblock", description="Blocking for record linkage: generate data, block, evaluate.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic labeled dataset")
    g.add_argument("--preset", choices=sorted(PRESETS), default=None, help="generator preset")
    g.add_argument("--config", default=None, help="generator config JSON (instead of --preset)")
    g.add_argument("--n-originals", type=int, default=None, help="override the number of originals")
    g.add_argument("--out", default=None, help="output CSV (default <out-dir>/<preset>-<seed>.csv)")
    g.add_argument("--write-config", default=None, help="also write the resolved config JSON here")
    _add_common(g)

    b = sub.add_parser("block", help="run one blocking method on a dataset")
    _add_data(b)
    _add_method(b)
    b.add_argument("--out", default=None,
                   help="output CSV: record_id,block_id for partitions, id_a,id_b for rule pair sets "
                        "(default <out-dir>/blocks.csv or pairs.csv)")
    _add_common(b)

    e = sub.add_parser("evaluate", help="score a partition or pair set against ground truth")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--partition", help="record_id,block_id CSV")
    src.add_argument("--pairs", help="id_a,id_b CSV of candidate pairs")
    e.add_argument("--truth", required=True, help="CSV with rec_id and ent_id columns (e.g. the dataset)")
    _add_common(e, seed=False)

    s = sub.add_parser("sweep", help="sensitivity sweep over a parameter grid")
    _add_data(s)
    _add_method(s)
    s.add_argument("--grid", required=True,
                   help='JSON file mapping parameter names to value lists, e.g. {"bands": [18, 22, 26]}')
    _add_common(s)

    k = sub.add_parser("bench", help="scaling benchmark: time versus number of records")
    _add_method(k)
    k.add_argument("--sizes", required=True, help="comma-separated ascending record counts")
    k.add_argument("--generator", default="rldata10000-analog", choices=sorted(PRESETS),
                   help="generator preset supplying the corruption settings (default rldata10000-analog)")
    k.add_argument("--repeats", type=int, default=1, help="runs per size; the fastest is kept (default 1)")
    k.add_argument("--sqrt-blocks", action="store_true", help="klsh: use c = round(sqrt(n)) blocks")
    _add_common(k)

    r = sub.add_parser("reproduce-tables", help="run every rule preset for the dataset's schema")
    _add_data(r)
    _add_common(r, seed=False)
    return ap


def _method_config(args) -> MethodConfig:
    params = {}
    for flag, (name, _, _) in _METHOD_FLAGS.items():
        v = getattr(args, flag.lstrip("-").replace("-", "_"))
        if v is not None:
            params[name] = v
    if args.preset is not None:
        method, base = METHOD_PRESETS[args.preset]
        if args.method is not None and args.method != method:
            raise ParameterError(f"preset {args.preset} is for method {method}, not {args.method}")
        return MethodConfig(method, {**base, **params})
    if args.method is None:
        raise ParameterError("give --method or --preset")
    return MethodConfig(args.method, params)


def _out_dir(args) -> Path:
    return Path(args.out_dir) if args.out_dir else default_out_dir()


def _load(args):
    return load_csv(args.data, resolve_schema(args.schema))


def _write_result(result, ds, path: Path) -> None:
    ids = ds.record_ids
    if isinstance(result, BlockingPartition):
        write_two_column(path, ("record_id", "block_id"), ids, result.assignment)
    else:
        pairs = result.pairs()
        write_two_column(path, ("id_a", "id_b"), ids[pairs[:, 0]], ids[pairs[:, 1]])


def cmd_generate(args) -> int:
    if (args.preset is None) == (args.config is None):
        raise ParameterError("give exactly one of --preset or --config")
    if args.preset is not None:
        cfg = GeneratorConfig.preset(args.preset, seed=args.seed, n_originals=args.n_originals)
        stem = f"{args.preset}-{args.seed}"
    else:
        cfg = GeneratorConfig.from_json(args.config)
        if args.n_originals is not None:
            cfg = GeneratorConfig(args.n_originals, cfg.schema, cfg.corruption)
        stem = Path(args.config).stem
    ds = cfg.build()
    out = Path(args.out) if args.out else _out_dir(args) / f"{stem}.csv"
    write_csv(ds, out)
    if args.write_config:
        write_json(cfg.to_dict(), args.write_config)
    print(f"wrote {ds.n} records to {out}")
    return EXIT_OK


def cmd_block(args) -> int:
    cfg = _method_config(args)
    cfg.validate()
    ds = _load(args)
    cfg.validate(ds.schema, ds.n)
    result = run_method(ds, cfg, seed=args.seed, threads=args.threads)
    is_part = isinstance(result, BlockingPartition)
    out = Path(args.out) if args.out else _out_dir(args) / ("blocks.csv" if is_part else "pairs.csv")
    _write_result(result, ds, out)
    what = f"{result.num_blocks} blocks" if is_part else f"{len(result)} candidate pairs"
    print(f"{cfg.name}: {what} -> {out}")
    return EXIT_OK


def _positions(ids: np.ndarray, known: np.ndarray, path) -> np.ndarray:
    order = np.argsort(known)
    idx = np.searchsorted(known, ids, sorter=order)
    idx = np.minimum(idx, len(known) - 1)
    pos = order[idx]
    if len(ids) and (known[pos] != ids).any():
        bad = int(ids[known[pos] != ids][0])
        raise IntegrityError(f"{path}: record id {bad} not in the truth file")
    return pos


def cmd_evaluate(args) -> int:
    ids, ents = load_labels(args.truth)
    n = len(ids)
    if n == 0:
        raise DataError(f"{args.truth}: no records")
    truth = np.array([p for g in entity_groups(ents.tolist()) for p in combinations(g, 2)],
                     dtype=np.int64).reshape(-1, 2)
    if args.partition:
        _, arr = read_two_column(args.partition)
        pos = _positions(arr[:, 0], ids, args.partition)
        if len(np.unique(pos)) != len(pos) or len(pos) != n:
            raise IntegrityError(f"{args.partition}: must assign every record exactly once")
        labels = np.empty(n, dtype=np.int64)
        labels[pos] = arr[:, 1]
        result = BlockingPartition(labels)
        name = Path(args.partition).name
    else:
        _, arr = read_two_column(args.pairs)
        a = _positions(arr[:, 0], ids, args.pairs)
        b = _positions(arr[:, 1], ids, args.pairs)
        if (a == b).any():
            raise IntegrityError(f"{args.pairs}: self-pair")
        result = CandidatePairSet(n, encode_pairs(a, b, n))
        name = Path(args.pairs).name
    report = score(result, truth, n, method=name)
    out = _out_dir(args)
    write_json(report.to_dict(), out / "report.json")
    write_text(report.to_text(), out / "report.txt")
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _method_config(args)
    try:
        with open(args.grid, encoding="utf-8") as fh:
            grid = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"{args.grid}: no such file") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.grid}: {exc}") from None
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ParameterError("grid must map parameter names to lists of values")
    ds = _load(args)
    results = sensitivity_sweep(ds, cfg, grid, seed=args.seed, threads=args.threads or 1)
    out = _out_dir(args)
    write_text(sensitivity_csv(results), out / "sweep.csv")
    reports = [r for _, r in results]
    labels = [", ".join(f"{k}={v}" for k, v in pt.items()) for pt, _ in results]
    write_json([r.to_dict() for r in reports], out / "report.json")
    write_text(format_table(reports, labels), out / "report.txt")
    sys.stdout.write(format_table(reports, labels))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _method_config(args)
    if args.sqrt_blocks:
        if cfg.name != "klsh":
            raise ParameterError("--sqrt-blocks only applies to klsh")
        cfg = MethodConfig("klsh", {**cfg.params, "num_blocks": "sqrt"})
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise ParameterError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    if any(s < 2 for s in sizes):
        raise ParameterError("sizes must be >= 2")
    cfg.validate()
    res = scaling_sweep(GeneratorConfig.preset(args.generator), cfg, sizes, seed=args.seed,
                        repeats=args.repeats)
    out = _out_dir(args)
    write_text(res.to_csv(), out / "scaling.csv")
    write_text(res.summary(), out / "scaling.txt")
    sys.stdout.write(res.to_csv() + res.summary())
    return EXIT_OK


def cmd_reproduce_tables(args) -> int:
    ds = _load(args)
    if ds.schema == RLDATA_SCHEMA:
        criteria = RLDATA_CRITERIA
    elif ds.schema == NOISY_SCHEMA:
        criteria = NOISY_CRITERIA
    else:
        raise ParameterError("reproduce-tables needs the rldata or noisy schema")
    truth = true_pair_positions(ds)
    reports = []
    for c in criteria.values():
        rep = score(rule_block(ds, c.rule, threads=args.threads or 1), truth, ds.n, method=c.name,
                    params={"expr": c.expression})
        reports.append(rep)
    table = format_table(reports, [c.label for c in criteria.values()])
    out = _out_dir(args)
    write_text(table, out / "tables.txt")
    write_json({c.name: r.to_dict() for c, r in zip(criteria.values(), reports)}, out / "tables.json")
    sys.stdout.write(table)
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "block": cmd_block,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "reproduce-tables": cmd_reproduce_tables,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if threads < 1:
        print("rlblock: parameter error: --threads must be >= 1", file=sys.stderr)
        return EXIT_PARAM
    args.threads = threads
    try:
        with threadpool_limits(limits=threads):
            return _COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"rlblock: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (DataError, OSError) as exc:
        print(f"rlblock: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RLBlockError as exc:
        print(f"rlblock: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
