import pytest

from dlfusion.decouple import DecoupleError, decouple, dump
from dlfusion.ir import parse


def test_one_pe_per_leaf_loop():
    p = parse("""mem A[8];
loop i = 0..4 { store A[i] = 1; }
loop j = 0..2 {
  loop k = 0..2 { load A[k]; }
  loop l = 0..2 { load A[l]; }
}
""")
    g = decouple(p)
    assert len(g.pes) == 3
    assert [pe.op_ids for pe in g.pes] == [(0,), (1,), (2,)]


def test_du_per_array_with_port_per_op():
    p = parse("""mem A[8];
mem B[8];
loop i = 0..4 { let x = load A[i]; store B[i] = x; }
loop j = 0..4 { store A[j] = 2; }
""")
    g = decouple(p)
    by_array = {d.array: d for d in g.dus}
    assert set(by_array) == {"A", "B"}
    assert sorted(by_array["A"].ports) == [0, 2]
    assert sorted(by_array["B"].ports) == [1]
    assert all(d.protected for d in g.dus)


def test_readonly_bare_load_du_unprotected():
    p = parse("""mem R[4] init [1, 2, 3, 4] readonly;
mem A[4];
loop i = 0..4 { load R[i]; store A[i] = 1; }
""")
    g = decouple(p)
    by_array = {d.array: d for d in g.dus}
    assert not by_array["R"].protected
    assert by_array["A"].protected


def test_cross_pe_scalar_gets_channel():
    p = parse("""mem A[8];
mem B[8];
mem C[8];
loop i = 0..4 {
  let x = load A[i];
  loop j = 0..4 { store B[j] = x; }
  loop k = 0..4 { store C[k] = x + 1; }
}
""")
    g = decouple(p)
    assert [ch.var for ch in g.channels] == ["x"]
    ch = g.channels[0]
    assert ch.producer == 0 and ch.consumer == 1


def test_backward_scalar_flow_rejected():
    with pytest.raises(DecoupleError, match="cyclic"):
        decouple(parse("""mem A[8];
mem B[8];
loop i = 0..4 {
  loop j = 0..4 { store B[j] = i + y; }
  let y = load A[i];
  loop k = 0..4 { store A[k] = y; }
}
""", check=False))


def test_if_around_loop_is_folded_into_pe():
    p = parse("""param N max 4;
mem A[8];
loop i = 0..N {
  if (N > 2) {
    loop j = 0..2 { store A[j] = i; }
  }
}
""")
    g = decouple(p)
    assert len(g.pes) == 1
    assert g.pes[0].conds


def test_agu_slice_excludes_condition_variables():
    """The address generator must not depend on values only the compute
    unit can produce: if-conditions over loaded data stay out of it."""
    p = parse("""mem A[8];
loop i = 0..8 {
  let v = load A[i];
  if (v > 3) { store A[i] = 0; }
}
""")
    g = decouple(p)
    assert "v" not in g.pes[0].agu_vars


def test_dump_mentions_every_pe_and_du():
    p = parse("""mem A[8];
loop i = 0..4 { store A[i] = 1; }
loop j = 0..4 { load A[j]; }
""")
    g = decouple(p)
    text = dump(p, g)
    assert "pe 0" in text and "pe 1" in text and "array=A" in text


def test_du_bindings_cover_all_ops():
    p = parse("""mem A[8];
loop i = 0..4 { let x = load A[i]; store A[i] = x + 1; }
""")
    g = decouple(p)
    assert set(g.du_bindings) == {0, 1}
