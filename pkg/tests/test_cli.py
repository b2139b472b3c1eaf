import json

import pytest

from dlfusion.cli import main

RMW = """param N max 64;
mem D[64];
loop i = 0..N { let d = load D[i]; store D[i] = d + 1; }
"""

GUARDED = """param N max 16;
mem A[16];
mem K[16] readonly;
loop i = 0..N {
  if (load K[i] > 1000000) { store A[i] = 7; }
  let x = load A[i];
  store A[i] = x + 1;
}
"""


@pytest.fixture
def program(tmp_path):
    f = tmp_path / "prog.dlf"
    f.write_text(RMW)
    return str(f)


def test_analyze(program, capsys):
    assert main(["analyze", program, "--pairs"]) == 0
    out = capsys.readouterr().out
    assert "cr={0,+,1}" in out
    assert "hazard pairs" in out


def test_analyze_json(program, tmp_path):
    out = tmp_path / "a.json"
    assert main(["analyze", program, "--json", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["ops"][0]["cr"] == "{0,+,1}"


def test_decouple(program, capsys):
    assert main(["decouple", program]) == 0
    assert "1 PEs" in capsys.readouterr().out
    assert main(["decouple", program, "--dump"]) == 0


def test_run_fused_and_oracle_digest(program, capsys, tmp_path):
    assert main(["run", program]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["deadlock"] is False and stats["cycles"] > 0
    assert main(["run", program, "--mode", "oracle"]) == 0
    digest = capsys.readouterr().out.strip()
    assert len(digest) == 16
    int(digest, 16)


def test_check_ok(program):
    assert main(["check", program]) == 0
    assert main(["check", program, "--no-forwarding"]) == 0
    assert main(["check", program, "--mode", "sequential"]) == 0


def test_check_detects_deadlock(tmp_path, capsys):
    f = tmp_path / "guarded.dlf"
    f.write_text(GUARDED)
    cfg = tmp_path / "cfg"
    cfg.write_text("speculation = false\nmax_cycles = 20000\n")
    assert main(["check", str(f), "--config", str(cfg)]) == 1
    assert "DEADLOCK" in capsys.readouterr().out
    assert main(["check", str(f)]) == 0  # speculation on by default


def test_check_warns_on_fallback(tmp_path, capsys):
    f = tmp_path / "fb.dlf"
    f.write_text("""mem A[8];
mem R[8] init [3, 1, 4, 1, 5, 2, 6, 0] readonly;
loop i = 0..8 { store A[load R[i]] = i; }
loop j = 0..8 { load A[j]; }
""")
    assert main(["check", str(f)]) == 0
    assert "sequentialized pair" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.dlf"
    f.write_text("mem A[4]; loop i = 0..2 { store A[q] = 1; }")
    assert main(["check", str(f)]) == 2
    assert "undeclared" in capsys.readouterr().err


def test_bench_on_directory(tmp_path, capsys):
    (tmp_path / "tiny.dlf").write_text(RMW)
    csv_out = tmp_path / "report.csv"
    assert main(["bench", "--corpus", str(tmp_path),
                 "--csv", str(csv_out)]) == 0
    head = csv_out.read_text().splitlines()[0]
    assert head == ("name,pe,du,ld,st,cycles_seq,cycles_fus1,cycles_fus2,"
                    "ratio_fus2_seq,pairs_before,pairs_after,"
                    "forwarded_loads,dram_requests")


def test_fuzz_reports_zero_failures(capsys):
    assert main(["fuzz", "--count", "25", "--seed", "11"]) == 0
    assert "0 failures" in capsys.readouterr().out
