from dlfusion.ir import Loop, parse
from dlfusion.progen import MAX_DEPTH, MAX_OPS, generate, generate_source


def _max_depth(stmts, d=0):
    out = d
    for s in stmts:
        if isinstance(s, Loop):
            out = max(out, _max_depth(s.body, d + 1))
        elif hasattr(s, "then"):
            out = max(out, _max_depth(s.then, d), _max_depth(s.els, d))
    return out


def test_deterministic_for_seed():
    assert generate_source(42) == generate_source(42)
    assert generate_source(42) != generate_source(43)


def test_generated_programs_are_valid_and_bounded():
    for seed in range(200):
        src, p = generate(seed)
        assert p == parse(src)
        assert len(p.mem_ops()) <= MAX_OPS
        assert _max_depth(p.body) <= MAX_DEPTH


def test_generated_addresses_stay_in_bounds():
    from dlfusion.oracle import interpret
    for seed in range(100):
        _, p = generate(seed)
        interpret(p, seed=seed)  # raises OracleError on any OOB access


def test_corpus_exercises_key_features():
    feats = {"if": 0, "rev": 0, "rec": 0, "data": 0, "nest": 0}
    for seed in range(300):
        src = generate_source(seed)
        feats["if"] += "if (" in src
        feats["rev"] += " - i" in src
        feats["rec"] += "step +" in src
        feats["data"] += "monotonic" in src
        feats["nest"] += src.count("loop") >= 2
    assert all(v >= 10 for v in feats.values()), feats
