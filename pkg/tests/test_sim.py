import json
import math

from dlfusion.ir import parse
from dlfusion.oracle import initial_memory, interpret, memory_digest
from dlfusion.sim import SimConfig, run

STREAM = """param N max 512;
mem A[512];
loop i = 0..N { store A[i] = i; }
"""

RMW = """param N max 256;
mem D[256];
loop i = 0..N { let d = load D[i]; store D[i] = d * 3 + 1; }
"""


def _run(src, seed=1, **kw):
    p = parse(src)
    mem0 = initial_memory(p, seed=seed)
    return p, mem0, run(p, SimConfig(**kw),
                        {k: list(v) for k, v in mem0.items()}, seed=seed)


def test_determinism():
    _, _, (m1, s1, t1) = _run(RMW)
    _, _, (m2, s2, t2) = _run(RMW)
    assert m1 == m2
    assert s1.to_json() == s2.to_json()


def test_unit_stride_burst_bound():
    """A unit-stride stream of L words coalesces into at most
    ceil(L / line) + 1 bursts."""
    _, _, (_, stats, _) = _run(STREAM)
    assert stats.bursts <= math.ceil(512 / 16) + 1
    assert stats.bursts <= stats.dram_requests


def test_stats_json_shape():
    _, _, (_, stats, _) = _run(RMW)
    d = json.loads(stats.to_json())
    assert set(d) == {"cycles", "dram_requests", "bursts",
                      "forwarded_loads", "stalls", "deadlock", "per_pe"}
    assert set(d["stalls"]) == {"raw", "war", "waw"}


def test_rmw_matches_oracle(check):
    ok, stats, _, _ = check(RMW)
    assert ok


def test_forwarding_off_still_correct(check):
    src = """param N max 200;
mem D[201];
loop i = 0..N { let d = load D[i]; store D[i + 1] = d * 2 + 1; }
"""
    ok_on, st_on, _, _ = check(src, forwarding=True)
    ok_off, st_off, _, _ = check(src, forwarding=False)
    assert ok_on and ok_off
    assert st_on.forwarded_loads > 0
    assert st_off.forwarded_loads == 0
    assert st_on.cycles < st_off.cycles


def test_forwarding_returns_youngest_store():
    """Two in-flight stores to one address: the load must observe the
    younger value."""
    src = """mem A[4];
mem OUT[8];
loop i = 0..8 {
  store A[0] = i * 2;
  store A[0] = i * 2 + 1;
  let x = load A[0];
  store OUT[i] = x;
}
"""
    p = parse(src)
    mem0 = initial_memory(p, seed=1)
    oracle_mem, _ = interpret(p, {k: list(v) for k, v in mem0.items()})
    mem, stats, _ = run(p, SimConfig(forwarding=True),
                        {k: list(v) for k, v in mem0.items()})
    assert mem["OUT"] == oracle_mem["OUT"] == [1, 3, 5, 7, 9, 11, 13, 15]


def test_unpruned_checks_agree_with_pruned(check):
    src = """mem A[16];
loop i = 0..16 { store A[i] = i; }
loop j = 0..16 { let x = load A[j]; store A[j] = x + 1; }
loop k = 0..16 { store A[k] = 7; }
"""
    ok_p, st_p, _, _ = check(src, use_pruning=True)
    ok_u, st_u, _, _ = check(src, use_pruning=False)
    assert ok_p and ok_u


def test_sequential_mode_matches_oracle(check):
    src = """param N max 4;
param M max 3;
mem A[12];
loop i = 0..N {
  loop j = 0..M { store A[i * M + j] = i + j; }
  loop k = 0..M { let x = load A[i * M + k]; store A[i * M + k] = x * 2; }
}
"""
    ok_f, st_f, _, _ = check(src)
    ok_s, st_s, _, _ = check(src, mode="sequential")
    assert ok_f and ok_s
    assert st_s.cycles >= st_f.cycles


def test_cross_pe_channel_value_flow(check):
    ok, _, _, _ = check("""mem A[8];
mem B[64];
mem C[64];
loop i = 0..8 {
  let x = load A[i];
  loop j = 0..8 { store B[i * 8 + j] = x; }
  loop k = 0..8 { store C[i * 8 + k] = x * 2; }
}
""")
    assert ok


def test_guarded_store_speculation(check):
    src = """param N max 32;
mem A[32];
mem K[32] readonly;
loop i = 0..N {
  if (load K[i] > 1000000) { store A[i] = 7; }
  let x = load A[i];
  store A[i] = x + 1;
}
"""
    ok, stats, _, _ = check(src, speculation=True)
    assert ok and not stats.deadlock
    _, _, (_, st_off, _) = _run(src, speculation=False, max_cycles=20000)
    assert st_off.deadlock


def test_watchdog_reports_deadlock_not_hang():
    _, _, (_, stats, _) = _run("""mem A[4];
mem K[4] readonly;
loop i = 0..4 {
  if (load K[i] > 1000000) { store A[i] = 1; }
  load A[i];
}
""", speculation=False, max_cycles=5000)
    assert stats.deadlock


def test_time_skip_performance():
    """10k independent iterations simulate in far fewer host steps than
    cycles: the run must finish quickly and still match."""
    import time
    t0 = time.time()
    p, mem0, (mem, stats, _) = _run("""param N max 10000;
mem A[10000];
loop i = 0..N { store A[i] = i; }
""")
    oracle_mem, _ = interpret(p, {k: list(v) for k, v in mem0.items()})
    assert memory_digest(mem) == memory_digest(oracle_mem)
    assert time.time() - t0 < 10.0


def test_per_pe_completion_cycles():
    _, _, (_, stats, _) = _run(STREAM)
    assert len(stats.per_pe) == 1
    assert 0 < stats.per_pe[0] <= stats.cycles
