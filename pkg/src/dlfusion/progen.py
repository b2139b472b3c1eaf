"""Seeded random program generator for the sequential-consistency fuzz gate.

Programs are emitted as DSL source so every failure has a self-contained
reproducer.  Generated shapes: up to three top-level loop nests of depth
at most three, loop bounds at most eight, at most six memory operations,
optional if-conditions around individual operations.  All addresses are
in bounds by construction.  The mix deliberately includes affine strides,
reversed (negative-step) addresses that force the program-order fallback,
scalar recurrences, and sorted data-dependent addresses carrying a
truthful monotonic annotation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

MAX_OPS = 6
MAX_DEPTH = 3
MAX_BOUND = 8


@dataclass
class _Gen:
    rng: random.Random
    lines: list
    arrays: dict          # name -> length (read-write arrays)
    ro_arrays: dict       # name -> list of words
    op_budget: int
    let_counter: int = 0
    name_counter: int = 0

    def fresh_let(self):
        self.let_counter += 1
        return f"v{self.let_counter}"


def _addr(g: _Gen, idxs, trips):
    """Random in-bounds address expression over the loop indices.

    Returns (text, max_value, reversed_flag)."""
    r = g.rng
    kind = r.random()
    if not idxs or kind < 0.10:
        c = r.randrange(0, 8)
        return str(c), c, False
    if kind < 0.30 and len(idxs) >= 2:
        # row-major pair over the two innermost indices
        i, j = idxs[-2], idxs[-1]
        ti, tj = trips[-2], trips[-1]
        return f"{i} * {tj} + {j}", (ti - 1) * tj + (tj - 1), False
    if kind < 0.45:
        # reversed innermost index: negative step, analysis falls back
        i, t = idxs[-1], trips[-1]
        return f"{t - 1} - {i}", t - 1, True
    # strided innermost index plus optional constant
    i, t = idxs[-1], trips[-1]
    c = r.randrange(1, 4)
    off = r.randrange(0, 4)
    return f"{i} * {c} + {off}", (t - 1) * c + off, False


def _value(g: _Gen, idxs, lets):
    r = g.rng
    terms = []
    pool = list(idxs) + list(lets)
    for _ in range(r.randrange(1, 3)):
        if pool and r.random() < 0.7:
            terms.append(r.choice(pool))
        else:
            terms.append(str(r.randrange(0, 100)))
    expr = " + ".join(terms)
    if r.random() < 0.3:
        expr += f" * {r.randrange(2, 5)}"
    return expr


def _cond(g: _Gen, idxs):
    r = g.rng
    if idxs:
        i = r.choice(idxs)
        return f"{i} {r.choice(['<', '>', '<=', '>=', '==', '!='])} " \
               f"{r.randrange(0, MAX_BOUND)}"
    return f"1 {r.choice(['==', '!='])} 1"


def _emit_ops(g: _Gen, idxs, trips, indent):
    """One leaf body: loads first, then stores, optionally if-guarded."""
    r = g.rng
    pad = "  " * indent
    n_ops = min(g.op_budget, r.randrange(1, 3))
    g.op_budget -= n_ops
    lets = []
    arr_names = list(g.arrays)
    touched = []
    for n in range(n_ops):
        arr = r.choice(arr_names)
        text, hi, _rev = _addr(g, idxs, trips)
        g.arrays[arr] = max(g.arrays[arr], hi + 1)
        is_store = (n == n_ops - 1) or r.random() < 0.5
        guard = r.random() < 0.25
        if guard:
            # guarded operations are stores: a let bound inside an if
            # would not be visible to later statements
            is_store = True
        if is_store:
            stmt = f"store {arr}[{text}] = {_value(g, idxs, lets)};"
        else:
            v = g.fresh_let()
            stmt = f"let {v} = load {arr}[{text}];"
            lets.append(v)
        if guard:
            g.lines.append(f"{pad}if ({_cond(g, idxs)}) {{")
            g.lines.append(f"{pad}  {stmt}")
            g.lines.append(f"{pad}}}")
        else:
            g.lines.append(f"{pad}{stmt}")
        touched.append(arr)
    return touched


def _emit_nest(g: _Gen, depth_left, idxs, trips, indent, top_level):
    r = g.rng
    pad = "  " * indent
    g.name_counter += 1
    idx = f"i{g.name_counter}"
    trip = r.randrange(2, MAX_BOUND + 1)
    rec = None
    if top_level and not idxs and r.random() < 0.25:
        # data-dependent sorted address through a readonly array
        name = f"R{len(g.ro_arrays)}"
        words, cur = [], 0
        for _ in range(trip):
            words.append(cur)
            cur += r.randrange(1, 4)
        g.ro_arrays[name] = words
        g.lines.append(f"{pad}loop {idx} = 0..{trip} {{")
        arr = r.choice(list(g.arrays))
        g.arrays[arr] = max(g.arrays[arr], words[-1] + 1)
        g.op_budget -= 1
        v = g.fresh_let()
        g.lines.append(f"{pad}  let {v} = load {arr}"
                       f"[load {name}[{idx}]] monotonic;")
        if g.op_budget > 0:
            g.op_budget -= 1
            g.lines.append(f"{pad}  store {arr}[load {name}[{idx}]] = "
                           f"{v} + 1 monotonic;")
        g.lines.append(f"{pad}}}")
        return
    want_sub = depth_left > 1 and r.random() < 0.55
    if not want_sub and r.random() < 0.2:
        # recurrences stay within a single leaf so the updated scalar
        # never crosses a processing-element boundary
        g.name_counter += 1
        rec = (f"s{g.name_counter}", r.choice([1, 2, 3]))
    g.lines.append(f"{pad}loop {idx} = 0..{trip} {{")
    if rec:
        name, step = rec
        g.lines.append(f"{pad}  {name}: init 0, step +{step};")
    body_idxs = idxs + [idx]
    body_trips = trips + [trip]
    if rec:
        # treat the recurrence like a strided pseudo-index
        body_idxs = body_idxs + [rec[0]]
        body_trips = body_trips + [(trip - 1) * rec[1] + 1]
    if want_sub:
        _emit_nest(g, depth_left - 1, body_idxs, body_trips,
                   indent + 1, False)
        if g.op_budget > 0 and r.random() < 0.3:
            _emit_nest(g, depth_left - 1, body_idxs, body_trips,
                       indent + 1, False)
    else:
        _emit_ops(g, body_idxs, body_trips, indent + 1)
    g.lines.append(f"{pad}}}")


def generate_source(seed: int) -> str:
    """Deterministically generate one valid DSL program."""
    rng = random.Random(seed)
    n_arrays = rng.randrange(1, 3)
    arrays = {f"A{n}": 1 for n in range(n_arrays)}
    g = _Gen(rng, [], arrays, {}, MAX_OPS)

    n_segments = rng.randrange(1, 4)
    for _ in range(n_segments):
        if g.op_budget <= 0:
            break
        _emit_nest(g, rng.randrange(1, MAX_DEPTH + 1), [], [], 0, True)

    header = []
    for name, length in g.arrays.items():
        header.append(f"mem {name}[{length}];")
    for name, words in g.ro_arrays.items():
        lit = ", ".join(str(w) for w in words)
        header.append(f"mem {name}[{len(words)}] init [{lit}] readonly;")
    return "\n".join(header + [""] + g.lines) + "\n"


def generate(seed: int):
    """Generate (source, Program) for a seed; always parses and validates."""
    from .ir import parse
    src = generate_source(seed)
    return src, parse(src)
