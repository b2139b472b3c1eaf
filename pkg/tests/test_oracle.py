import pytest

from dlfusion.ir import parse
from dlfusion.oracle import (OracleError, dynamic_order, initial_memory,
                             interpret, memory_digest)


def test_interpret_small_program():
    p = parse("""mem A[4];
loop i = 0..4 { store A[i] = i * 2 + 1; }
""")
    mem, trace = interpret(p, {"A": [0, 0, 0, 0]})
    assert mem["A"] == [1, 3, 5, 7]
    assert [ev.address for ev in trace] == [0, 1, 2, 3]
    assert all(ev.kind == "store" for ev in trace)


def test_zero_trip_loop():
    p = parse("""param N max 4;
mem A[4];
loop i = 2..2 { store A[i] = 9; }
""")
    mem, trace = interpret(p, {"A": [5, 5, 5, 5]})
    assert mem["A"] == [5, 5, 5, 5] and trace == []


def test_scalar_recurrence_semantics():
    p = parse("""mem A[8];
loop i = 0..4 {
  s: init 1, step *2;
  store A[i] = s;
}
""")
    mem, _ = interpret(p, {"A": [0] * 8})
    assert mem["A"][:4] == [1, 2, 4, 8]


def test_if_else_branches():
    p = parse("""mem A[4];
loop i = 0..4 {
  if (i < 2) { store A[i] = 1; } else { store A[i] = 2; }
}
""")
    mem, _ = interpret(p, {"A": [0] * 4})
    assert mem["A"] == [1, 1, 2, 2]


def test_out_of_bounds_rejected():
    p = parse("mem A[2]; loop i = 0..4 { store A[i] = 1; }", check=False)
    with pytest.raises(OracleError):
        interpret(p, {"A": [0, 0]})


def test_initial_memory_is_seed_deterministic():
    p = parse("mem A[16]; mem B[4] init [9, 9, 9, 9] readonly;")
    m1, m2 = initial_memory(p, seed=7), initial_memory(p, seed=7)
    m3 = initial_memory(p, seed=8)
    assert m1 == m2
    assert m1["A"] != m3["A"]
    assert m1["B"] == [9, 9, 9, 9]  # explicit initializers always honored


def test_memory_digest_sensitivity():
    base = {"A": [1, 2, 3]}
    assert memory_digest(base) != memory_digest({"A": [1, 2, 4]})
    assert memory_digest(base) == memory_digest({"A": [1, 2, 3]})


def test_dynamic_order_pairs():
    p = parse("""mem A[4];
loop i = 0..2 { store A[i] = 1; }
loop j = 0..2 { load A[j]; }
""")
    _, trace = interpret(p)
    rel = dynamic_order(trace, 0, 1)
    assert len(rel) == 4
    assert all(before for _, _, before in rel)


def test_trace_replay_reproduces_memory():
    p = parse("""mem A[8];
loop i = 0..8 { let x = load A[i]; store A[7 - i] = x + 1; }
""")
    init = {"A": [3, 1, 4, 1, 5, 9, 2, 6]}
    mem, trace = interpret(p, {k: list(v) for k, v in init.items()})
    replay = {k: list(v) for k, v in init.items()}
    for ev in trace:
        if ev.kind == "store":
            replay["A"][ev.address] = ev.value
    assert replay == mem
