import pytest

from dlfusion.ir import parse
from dlfusion.oracle import initial_memory, interpret, memory_digest
from dlfusion.sim import SimConfig, run


def simulate(src_or_program, seed=1, **cfg_kw):
    """Run oracle and simulator; return (matches, stats, oracle_mem, mem)."""
    p = parse(src_or_program) if isinstance(src_or_program, str) \
        else src_or_program
    mem0 = initial_memory(p, seed=seed)
    oracle_mem, _ = interpret(p, {k: list(v) for k, v in mem0.items()},
                              seed=seed)
    mem, stats, _ = run(p, SimConfig(**cfg_kw),
                        {k: list(v) for k, v in mem0.items()}, seed=seed)
    ok = (not stats.deadlock and
          memory_digest(mem) == memory_digest(oracle_mem))
    return ok, stats, oracle_mem, mem


@pytest.fixture
def check():
    return simulate
