import hashlib
import json

import pytest

from rlblock.cli import EXIT_DATA, EXIT_OK, EXIT_PARAM, EXIT_USAGE, _METHOD_FLAGS, build_parser, main
from rlblock.io import read_two_column


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    path = d / "data.csv"
    assert main(["generate", "--preset", "rldata500-analog", "--seed", "3", "--out", str(path)]) == EXIT_OK
    return path


def test_generate_twice_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["generate", "--preset", "rldata10000-analog", "--seed", "7", "--out", str(p)]) == EXIT_OK
    assert _sha(a) == _sha(b)


def test_generate_default_location_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RLBLOCK_OUT_DIR", str(tmp_path))
    assert main(["generate", "--preset", "rldata500-analog", "--seed", "1", "--write-config",
                 str(tmp_path / "cfg.json")]) == EXIT_OK
    assert (tmp_path / "rldata500-analog-1.csv").exists()
    assert main(["generate", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "again.csv")]) == EXIT_OK
    assert _sha(tmp_path / "again.csv") == _sha(tmp_path / "rldata500-analog-1.csv")


def test_block_and_evaluate(tmp_path, data_csv, capsys):
    out = tmp_path / "blocks.csv"
    assert main(["block", "--data", str(data_csv), "--preset", "tlsh-rldata", "--out", str(out)]) == EXIT_OK
    header, arr = read_two_column(out)
    assert header == ["record_id", "block_id"] and len(arr) == 500
    assert main(["evaluate", "--partition", str(out), "--truth", str(data_csv),
                 "--out-dir", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert 0 <= report["recall"] <= 100 and report["n"] == 500
    assert "Recall" in (tmp_path / "report.txt").read_text()


def test_rule_block_writes_pairs(tmp_path, data_csv):
    out = tmp_path / "pairs.csv"
    assert main(["block", "--data", str(data_csv), "--method", "rule", "--rule-expr",
                 "dis(by) | dis(bm)", "--out", str(out)]) == EXIT_OK
    header, arr = read_two_column(out)
    assert header == ["id_a", "id_b"] and (arr[:, 0] < arr[:, 1]).all()
    assert main(["evaluate", "--pairs", str(out), "--truth", str(data_csv), "--out-dir", str(tmp_path)]) == EXIT_OK


@pytest.mark.parametrize(
    "argv, code",
    [
        (["block", "--method", "klsh", "--num-blocks", "0"], EXIT_PARAM),
        (["block", "--method", "klsh"], EXIT_PARAM),
        (["block", "--method", "canopy", "--t1", "1", "--t2", "2"], EXIT_PARAM),
        (["block", "--method", "rule", "--rule-expr", "dis(nope)"], EXIT_DATA),
        (["block", "--method", "rule", "--rule-expr", "dis(by"], EXIT_PARAM),
        (["block", "--method", "tlsh", "--bands", "200"], EXIT_PARAM),
        (["block", "--method", "knn", "--kmin", "501"], EXIT_PARAM),
        (["block", "--method", "tlsh", "--bogus"], EXIT_USAGE),
    ],
)
def test_block_errors(argv, code, data_csv, tmp_path, capsys):
    argv = argv[:1] + ["--data", str(data_csv), "--out-dir", str(tmp_path)] + argv[1:]
    assert main(argv) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert err and err[-1].startswith("rlblock:")


def test_missing_file_is_data_error(tmp_path, capsys):
    assert main(["block", "--data", str(tmp_path / "nope.csv"), "--method", "tlsh"]) == EXIT_DATA
    assert "nope.csv" in capsys.readouterr().err


def test_evaluate_unknown_id(tmp_path, data_csv):
    bad = tmp_path / "bad.csv"
    bad.write_text("record_id,block_id\n99999,0\n")
    assert main(["evaluate", "--partition", str(bad), "--truth", str(data_csv)]) == EXIT_DATA


def test_sweep(tmp_path, data_csv):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"bands": [18, 26]}))
    assert main(["sweep", "--data", str(data_csv), "--preset", "tlsh-rldata", "--grid", str(grid),
                 "--out-dir", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("bands,recall") and len(lines) == 3
    grid.write_text("[1, 2]")
    assert main(["sweep", "--data", str(data_csv), "--preset", "tlsh-rldata", "--grid", str(grid)]) == EXIT_PARAM


def test_bench(tmp_path, capsys):
    assert main(["bench", "--method", "klsh", "--sqrt-blocks", "--sizes", "100,200,400",
                 "--out-dir", str(tmp_path)]) == EXIT_OK
    assert "time slope" in (tmp_path / "scaling.txt").read_text()
    assert (tmp_path / "scaling.csv").read_text().startswith("n,wall_time,vocab_size")
    assert main(["bench", "--method", "klsh", "--sizes", "400,200", "--num-blocks", "3"]) == EXIT_PARAM


def test_reproduce_tables(tmp_path, data_csv):
    assert main(["reproduce-tables", "--data", str(data_csv), "--out-dir", str(tmp_path)]) == EXIT_OK
    tables = json.loads((tmp_path / "tables.json").read_text())
    assert sorted(tables) == sorted(f"t1c{i}" for i in range(1, 13))
    assert tables["t1c9"]["recall"] == 100.0


def test_block_output_independent_of_threads(tmp_path, data_csv):
    outs = []
    for threads in ("1", "4"):
        out = tmp_path / f"k{threads}.csv"
        assert main(["block", "--data", str(data_csv), "--preset", "klsh-rldata", "--num-blocks", "10",
                     "--threads", threads, "--seed", "5", "--out", str(out)]) == EXIT_OK
        outs.append(_sha(out))
    assert outs[0] == outs[1]


def test_help_documents_every_flag():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    for name, p in sub.items():
        text = p.format_help()
        for action in p._actions:
            for opt in action.option_strings:
                assert opt in text
            if action.option_strings and action.dest != "help":
                assert action.help, f"{name} {action.option_strings} lacks help"
    block_help = sub["block"].format_help()
    for flag in _METHOD_FLAGS:
        assert flag in block_help
