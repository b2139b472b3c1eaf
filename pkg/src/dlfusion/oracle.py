"""Sequential reference interpreter.

Executes a Program in plain program order against a word-addressed memory.
Its final memory and access trace are the ground truth every concurrent
simulation mode is compared against.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .ir import Assign, Bin, If, Load, Loop, MemOp, Num, Program, Var


class OracleError(Exception):
    pass


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    op_id: int
    kind: str
    address: int
    value: int
    ivec: tuple[int, ...]


def initial_memory(p: Program, seed: int | None = None) -> dict[str, list[int]]:
    """Backing words per array.  With a seed, arrays declared with a plain
    scalar fill get a deterministic pseudo-random fill instead (explicit
    list initializers are always honored)."""
    mem = {}
    for a in p.arrays:
        if seed is not None and not isinstance(a.init, tuple):
            rng = random.Random((seed << 16) ^ (hash(a.name) & 0xFFFF))
            mem[a.name] = [rng.randrange(0, 1 << 16) for _ in range(a.length)]
        else:
            mem[a.name] = a.initial_words()
    return mem


def eval_expr(e, env, load_fn):
    """Evaluate an expression.  load_fn(array, addr) services inline loads."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise OracleError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Load):
        return load_fn(e.array, eval_expr(e.addr, env, load_fn))
    if isinstance(e, Bin):
        a = eval_expr(e.lhs, env, load_fn)
        b = eval_expr(e.rhs, env, load_fn)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "<":
            return int(a < b)
        if op == "<=":
            return int(a <= b)
        if op == ">":
            return int(a > b)
        if op == ">=":
            return int(a >= b)
        if op == "==":
            return int(a == b)
        if op == "!=":
            return int(a != b)
    raise TypeError(e)


def interpret(p: Program, memory: dict[str, list[int]] | None = None,
              seed: int | None = None):
    """Run the program sequentially.  Returns (final memory, trace)."""
    mem = {k: list(v) for k, v in (memory or initial_memory(p, seed)).items()}
    trace: list[TraceEvent] = []
    env = {s.name: s.max_value for s in p.symbols}
    ivec: list[int] = []

    def access(arr, addr, op=None):
        words = mem.get(arr)
        if words is None:
            raise OracleError(f"unknown array {arr!r}")
        if not 0 <= addr < len(words):
            where = f"op {op.id}" if op else "inline load"
            raise OracleError(f"address {addr} out of bounds for {arr!r} "
                              f"({where}, iteration {tuple(ivec)})")
        return words

    def ro_load(arr, addr):
        return access(arr, addr)[addr]

    def run(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                env[s.name] = eval_expr(s.expr, env, ro_load)
            elif isinstance(s, MemOp):
                addr = eval_expr(s.addr, env, ro_load)
                words = access(s.array, addr, s)
                if s.kind == "load":
                    value = words[addr]
                    if s.let_name:
                        env[s.let_name] = value
                else:
                    value = eval_expr(s.value, env, ro_load)
                    words[addr] = value
                trace.append(TraceEvent(len(trace), s.id, s.kind, addr,
                                        value, tuple(ivec)))
            elif isinstance(s, If):
                if eval_expr(s.cond, env, ro_load):
                    run(s.then)
                else:
                    run(s.els)
            elif isinstance(s, Loop):
                lo = eval_expr(s.lo, env, ro_load)
                hi = eval_expr(s.hi, env, ro_load)
                for r in s.recs:
                    env[r.name] = eval_expr(r.init, env, ro_load)
                ivec.append(lo)
                for i in range(lo, hi):
                    ivec[-1] = i
                    env[s.index] = i
                    run(s.body)
                    for r in s.recs:
                        if r.kind == "+":
                            env[r.name] += r.amount
                        elif r.kind == "*":
                            env[r.name] *= r.amount
                        else:
                            env[r.name] = eval_expr(r.update, env, ro_load)
                ivec.pop()

    run(p.body)
    return mem, trace


def dynamic_order(trace, op_a: int, op_b: int):
    """For every (instance of a, instance of b) pair, whether the a instance
    precedes the b instance in the sequential trace."""
    if op_a == op_b:
        raise ValueError("dynamic_order requires two distinct ops")
    evs_a = [e for e in trace if e.op_id == op_a]
    evs_b = [e for e in trace if e.op_id == op_b]
    return [(ea, eb, ea.seq < eb.seq) for ea in evs_a for eb in evs_b]


def memory_digest(mem: dict[str, list[int]], order=None) -> int:
    """64-bit FNV-1a over all words, arrays in declaration order."""
    h = 0xCBF29CE484222325
    names = order if order is not None else sorted(mem)
    for name in names:
        for w in mem[name]:
            for byte in (w & ((1 << 64) - 1)).to_bytes(8, "little"):
                h ^= byte
                h = (h * 0x100000001B3) & ((1 << 64) - 1)
    return h
