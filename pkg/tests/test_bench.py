import csv
import io

from dlfusion.bench import (CSV_COLUMNS, corpus_sources, run_benchmark,
                            to_csv, to_table)
from dlfusion.ir import parse

EXPECTED_KERNELS = ["bnn", "fft", "hist+add", "matpower", "pagerank",
                    "rawloop", "tanh+spmv", "warloop", "wawloop"]


def test_bundled_corpus_contents():
    names = [n for n, _ in corpus_sources()]
    assert names == EXPECTED_KERNELS  # sorted by name


def test_csv_columns_exact():
    assert CSV_COLUMNS == [
        "name", "pe", "du", "ld", "st",
        "cycles_seq", "cycles_fus1", "cycles_fus2", "ratio_fus2_seq",
        "pairs_before", "pairs_after", "forwarded_loads", "dram_requests"]


def test_single_benchmark_row_roundtrip():
    src = dict(corpus_sources())["rawloop"]
    row = run_benchmark("rawloop", parse(src))
    assert row.matched
    assert row.pe == 2 and row.du == 1
    text = to_csv([row])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 1
    assert list(rows[0]) == CSV_COLUMNS
    assert rows[0]["name"] == "rawloop"
    assert int(rows[0]["cycles_fus2"]) == row.cycles_fus2


def test_table_rendering_contains_all_rows():
    src = dict(corpus_sources())["warloop"]
    row = run_benchmark("warloop", parse(src))
    table = to_table([row])
    assert "warloop" in table and "cycles_seq" in table


def test_empty_corpus(tmp_path):
    assert corpus_sources(str(tmp_path)) == []
    assert to_csv([]).strip().split(",")[0] == "name"


def test_directory_corpus(tmp_path):
    (tmp_path / "tiny.dlf").write_text(
        "mem A[4];\nloop i = 0..4 { store A[i] = i; }\n")
    items = corpus_sources(str(tmp_path))
    assert [n for n, _ in items] == ["tiny"]
