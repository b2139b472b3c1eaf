import pytest

from dlfusion.ir import DslError, If, Loop, MemOp, parse, topo_order


def test_parse_basic_program():
    p = parse("""param N max 8;
mem A[8];
loop i = 0..N {
  store A[i] = i * 2 + 1;
}
""")
    assert [s.name for s in p.symbols] == ["N"]
    assert p.symbols[0].max_value == 8
    ops = p.mem_ops()
    assert len(ops) == 1 and ops[0].is_store and ops[0].array == "A"


def test_memop_ids_are_preorder():
    p = parse("""mem A[8];
loop i = 0..4 {
  let x = load A[i];
  if (i < 2) { store A[i] = x; } else { store A[i] = x + 1; }
}
loop j = 0..4 { load A[j]; }
""")
    assert topo_order(p) == [0, 1, 2, 3]


def test_init_list_and_padding():
    p = parse("mem A[5] init [1, 2, 3] readonly;")
    assert p.arrays[0].initial_words() == [1, 2, 3, 0, 0]


def test_scalar_recurrence_forms():
    p = parse("""mem A[64];
loop i = 0..4 {
  s: init 1, step *2;
  t: init 0, step +3;
  store A[s + t] = s;
}
""")
    loop = p.body[0]
    assert isinstance(loop, Loop)
    kinds = sorted(r.kind for r in loop.recs)
    assert kinds == ["*", "+"]


def test_monotonic_annotation_forms():
    p = parse("""mem A[8];
mem R[8] init [0, 1, 2, 3, 4, 5, 6, 7] readonly;
loop i = 0..8 {
  let x = load A[load R[i]] monotonic;
  store A[load R[i]] = x monotonic @1;
}
""")
    ld, st = p.mem_ops()
    assert ld.annotation == "all"
    assert st.annotation == frozenset({1})


def test_undeclared_identifier_rejected():
    with pytest.raises(DslError, match="undeclared"):
        parse("mem A[4]; loop i = 0..2 { store A[i] = q; }")


def test_inline_load_of_writable_array_rejected():
    with pytest.raises(DslError, match="let"):
        parse("""mem A[4];
loop i = 0..2 { store A[i] = load A[i] + 1; }
""")


def test_protected_load_cannot_feed_address():
    with pytest.raises(DslError):
        parse("""mem A[8];
loop i = 0..4 {
  let x = load A[i];
  store A[x] = 1;
}
""")


def test_guarded_ops_parse_into_if():
    p = parse("""mem A[4];
loop i = 0..4 {
  if (i < 2) { store A[i] = 1; }
}
""")
    loop = p.body[0]
    assert isinstance(loop.body[0], If)
    assert isinstance(loop.body[0].then[0], MemOp)
