"""Program-order schedules: per-depth invocation counters, lastIter hint
bits, sentinels, and the statically configured schedule comparator.

A schedule is a tuple of counters, one per loop depth enclosing the owning
memory operation.  Counter i is incremented once per invocation of the
depth-i loop body and is never reset, so the counter at the innermost
shared depth of two operations totally orders their body invocations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import Assign, If, Loop, MemOp, Program, expr_vars, topo_order
from .oracle import initial_memory, eval_expr

SENTINEL = 2**64 - 1


class _Poison:
    """Value a decoupled address generator cannot compute locally."""
    def __repr__(self):
        return "<poison>"


POISON = _Poison()


@dataclass(frozen=True)
class Schedule:
    elems: tuple
    last_iter: tuple
    is_sentinel: bool = False

    def elem(self, depth: int) -> int:
        if self.is_sentinel:
            return SENTINEL
        return self.elems[depth - 1]


def sentinel_schedule(n: int) -> Schedule:
    return Schedule((SENTINEL,) * n, (True,) * n, True)


@dataclass(frozen=True)
class ComparatorConfig:
    k: int        # innermost shared loop depth; 0 = no shared loop
    le: bool      # True: compare with <= (a precedes b); False: <
    delta: int    # 1 if a precedes b, else 0


def shared_loops(p: Program, a_id: int, b_id: int) -> int:
    """Number of loops shared by two ops (length of common chain prefix)."""
    ca, cb = p.loops_of(a_id), p.loops_of(b_id)
    k = 0
    for la, lb in zip(ca, cb):
        if la is lb:
            k += 1
        else:
            break
    return k


def configure_comparator(p: Program, a_id: int, b_id: int) -> ComparatorConfig:
    if a_id == b_id:
        raise ValueError("cannot compare an operation against itself")
    order = topo_order(p)
    a_first = order.index(a_id) < order.index(b_id)
    return ComparatorConfig(shared_loops(p, a_id, b_id), a_first,
                            1 if a_first else 0)


def precedes(sa: Schedule, sb: Schedule, cfg: ComparatorConfig,
             no_pending_ack_b: bool = False,
             req_sb: Schedule | None = None) -> bool:
    """Program-order safety: is a's request ordered no later than what b has
    already acknowledged (sb), or than b's own next request (req_sb) when b
    has nothing outstanding?"""
    if cfg.k == 0:
        raise ValueError("k=0 pairs are resolved statically")
    ea, eb = sa.elem(cfg.k), sb.elem(cfg.k)
    if (ea <= eb) if cfg.le else (ea < eb):
        return True
    if req_sb is not None and no_pending_ack_b:
        er = req_sb.elem(cfg.k)
        return (ea <= er) if cfg.le else (ea < er)
    return False


# ---------------------------------------------------------------------------
# AGU instrumentation: emission walker

@dataclass(frozen=True)
class Emission:
    op_id: int
    kind: str          # "load" | "store" | "sentinel"
    addr: int          # 0 for sentinel emissions
    schedule: Schedule
    valid_poisoned: bool = False  # guard condition unavailable in the AGU
    gseq: int = 0      # global program-order rank of the emitting statement


def trace_line(e: Emission) -> str:
    s = e.schedule
    elems = ",".join(str(x) for x in s.elems)
    last = ",".join(str(int(b)) for b in s.last_iter)
    return (f"op={e.op_id} addr={e.addr} sched=[{elems}] last=[{last}] "
            f"sentinel={int(s.is_sentinel)}")


def agu_emissions(p: Program, op_ids, memory=None, symbols=None,
                  speculative: bool = False, lookahead: bool = True):
    """Yield AGU emissions for one processing element's memory operations.

    The ops must lie on a single loop chain (one PE owns one leaf loop).
    Schedule counters are shared across all ops of the chain and never
    reset.  In speculative mode, if-conditions are ignored: guarded ops are
    emitted unconditionally (both branches walked) and values the AGU
    cannot compute locally are poisoned, which is sound because validated
    addresses and bounds never depend on them.  Ends with one sentinel
    emission per op.
    """
    ops = {p.op(i).id: p.op(i) for i in op_ids}
    depth_of = {i: len(p.loops_of(i)) for i in op_ids}
    chain: list[Loop] = []
    for i in op_ids:
        c = p.loops_of(i)
        if len(c) > len(chain):
            chain = c
    for i in op_ids:
        c = p.loops_of(i)
        if any(x is not y for x, y in zip(c, chain)):
            raise ValueError("ops do not share a single loop chain")
    chain_pos = {id(l): d for d, l in enumerate(chain, start=1)}

    mem = memory if memory is not None else initial_memory(p)
    env = {s.name: s.max_value for s in p.symbols}
    env.update(symbols or {})
    elems = [0] * len(chain)
    last = [False] * len(chain)

    readonly = {a.name for a in p.arrays if a.readonly}

    def ro_load(arr, addr):
        if speculative and arr not in readonly:
            return POISON
        return mem[arr][addr]

    def ev(e):
        if any(env.get(v, 0) is POISON for v in expr_vars(e)):
            return POISON
        try:
            return eval_expr(e, env, ro_load)
        except TypeError:
            return POISON

    def snapshot(n):
        return Schedule(tuple(elems[:n]), tuple(last[:n]))

    gseq = [0]  # rank of every mem-op statement visit, shared across AGUs

    def run(stmts, guarded):
        for s in stmts:
            if isinstance(s, Assign):
                env[s.name] = ev(s.expr)
            elif isinstance(s, MemOp):
                gseq[0] += 1
                if s.id in ops:
                    addr = ev(s.addr)
                    if addr is POISON:
                        raise ValueError(
                            f"op {s.id}: address not computable in the AGU")
                    yield Emission(s.id, s.kind, addr,
                                   snapshot(depth_of[s.id]), guarded,
                                   gseq[0])
                if s.let_name:
                    env[s.let_name] = POISON
            elif isinstance(s, If):
                c = ev(s.cond)
                if speculative or c is POISON:
                    yield from run(s.then, True)
                    yield from run(s.els, True)
                elif c:
                    yield from run(s.then, guarded)
                else:
                    yield from run(s.els, guarded)
            elif isinstance(s, Loop):
                lo, hi = ev(s.lo), ev(s.hi)
                if lo is POISON or hi is POISON:
                    raise ValueError("loop bound not computable in the AGU")
                for r in s.recs:
                    env[r.name] = ev(r.init)
                d = chain_pos.get(id(s))
                for i in range(lo, hi):
                    if d is not None:
                        elems[d - 1] += 1
                        last[d - 1] = (i == hi - 1) if lookahead else False
                    env[s.index] = i
                    yield from run(s.body, guarded)
                    for r in s.recs:
                        if r.kind == "+":
                            if env[r.name] is not POISON:
                                env[r.name] += r.amount
                        elif r.kind == "*":
                            if env[r.name] is not POISON:
                                env[r.name] *= r.amount
                        else:
                            env[r.name] = ev(r.update)

    yield from run(p.body, False)
    for i in op_ids:
        yield Emission(i, "sentinel", 0, sentinel_schedule(depth_of[i]),
                       False, SENTINEL)
