"""Decoupled access/execute transformation.

Each leaf loop becomes a processing element (PE) that replicates its
ancestor loop control.  Straight-line parent-body statements are attached
to the nearest following leaf's PE; statements after the last leaf of a
subtree are attached to that subtree's last PE.  Scalar values produced
inside one PE and consumed by a later one travel through FIFO channels
written at the producer's loop exit and read in the consumer's pre-header.
If-conditions around memory operations are speculated: the AGU issues the
requests unconditionally and the CU supplies a valid bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import (Assign, Bin, If, Loop, MemOp, Num, Program, expr_loads,
                 expr_vars)


class DecoupleError(Exception):
    pass


@dataclass(frozen=True)
class SpeculationMark:
    op_id: int
    hoisted: bool
    valid_expr: object | None  # conjunction of the guarding conditions


@dataclass(frozen=True)
class PlacedStmt:
    stmt: object
    depth: int                 # loop depth at which the statement executes
    conds: tuple               # folded if-conditions guarding it


@dataclass
class PE:
    id: int
    leaf: Loop | None
    chain: tuple               # enclosing loops, outermost first (incl. leaf)
    pre: tuple                 # PlacedStmts executing before the leaf
    post: tuple                # PlacedStmts executing after the leaf
    conds: tuple               # folded conditions guarding the leaf itself
    op_ids: tuple
    marks: tuple = ()
    agu_vars: frozenset = frozenset()


@dataclass(frozen=True)
class Channel:
    fifo_id: int
    producer: int
    consumer: int
    var: str


@dataclass
class DU:
    id: int
    array: str
    protected: bool
    ports: dict  # op_id -> port index


@dataclass
class PEGraph:
    pes: list
    channels: list
    dus: list
    du_bindings: dict  # op_id -> (du_id, port)


def _contains_loop(stmts) -> bool:
    for s in stmts:
        if isinstance(s, Loop):
            return True
        if isinstance(s, If) and (_contains_loop(s.then) or
                                  _contains_loop(s.els)):
            return True
    return False


def _negate(cond):
    return Bin("==", cond, Num(0))


def _stmt_ops(stmts) -> list[MemOp]:
    out = []
    for s in stmts:
        if isinstance(s, MemOp):
            out.append(s)
        elif isinstance(s, If):
            out += _stmt_ops(s.then) + _stmt_ops(s.els)
        elif isinstance(s, Loop):
            out += _stmt_ops(s.body)
    return out


def decouple(p: Program) -> PEGraph:
    pes: list[PE] = []

    def make_pe(leaf, chain, pre, conds):
        body_ops = _stmt_ops(leaf.body) if leaf else []
        pre_ops = _stmt_ops([ps.stmt for ps in pre])
        pe = PE(len(pes), leaf,
                tuple(chain + ([leaf] if leaf else [])),
                tuple(pre), (), tuple(conds),
                tuple(o.id for o in pre_ops + body_ops))
        pes.append(pe)
        return pe

    def walk(stmts, chain, conds, carry):
        created, pending = [], list(carry)
        for s in stmts:
            if isinstance(s, Loop):
                if _contains_loop(s.body):
                    sub, trail = walk(s.body, chain + [s], conds, pending)
                    pending = []
                    created += sub
                    if trail:
                        # statements after the subtree's last leaf
                        last = created[-1]
                        last.post = last.post + tuple(trail)
                else:
                    created.append(make_pe(s, chain, pending, conds))
                    pending = []
            elif isinstance(s, If) and _contains_loop([s]):
                sub, trail = walk(s.then, chain, conds + [s.cond], pending)
                pending = []
                created += sub
                if trail and created:
                    created[-1].post = created[-1].post + tuple(trail)
                sub, trail = walk(s.els, chain,
                                  conds + [_negate(s.cond)], [])
                created += sub
                if trail and created:
                    created[-1].post = created[-1].post + tuple(trail)
            else:
                pending.append(PlacedStmt(s, len(chain), tuple(conds)))
        return created, pending

    created, pending = walk(p.body, [], [], [])
    if pending or not created:
        if created:
            created[-1].post = created[-1].post + tuple(pending)
        else:
            make_pe(None, [], pending, [])

    for pe in pes:
        pe.marks = tuple(_speculation_marks(pe))
        pe.agu_vars = _agu_slice_vars(p, pe)

    channels = _build_channels(p, pes)
    dus, bindings = assign_du_ports(p, pes)
    return PEGraph(pes, channels, dus, bindings)


# ---------------------------------------------------------------------------
# speculation

def _speculation_marks(pe: PE):
    marks = []

    def visit(stmts, conds):
        for s in stmts:
            if isinstance(s, MemOp):
                if conds:
                    marks.append(SpeculationMark(s.id, True, _conj(conds)))
            elif isinstance(s, If):
                visit(s.then, conds + [s.cond])
                visit(s.els, conds + [_negate(s.cond)])
            elif isinstance(s, Loop):
                visit(s.body, conds)

    for ps in pe.pre:
        visit([ps.stmt], list(ps.conds))
    if pe.leaf is not None:
        visit(pe.leaf.body, list(pe.conds))
    for ps in pe.post:
        visit([ps.stmt], list(ps.conds))
    return marks


def _conj(conds):
    e = conds[0]
    for c in conds[1:]:
        e = Bin("*", e, c)
    return e


# ---------------------------------------------------------------------------
# AGU slice (dead code elimination over the address/bound closure)

def _definitions(stmts):
    """name -> defining expr(s) for assigns, recurrences, and let-loads."""
    defs = {}
    for s in stmts:
        if isinstance(s, Assign):
            defs.setdefault(s.name, []).append(s.expr)
        elif isinstance(s, MemOp) and s.let_name:
            defs.setdefault(s.let_name, []).append(s.addr)
        elif isinstance(s, If):
            # conditions are CU business (speculation); not slice roots
            for n, es in _definitions(s.then + s.els).items():
                defs.setdefault(n, []).extend(es)
        elif isinstance(s, Loop):
            for r in s.recs:
                exprs = [r.init]
                if r.update is not None:
                    exprs.append(r.update)
                defs.setdefault(r.name, []).extend(exprs)
            for n, es in _definitions(s.body).items():
                defs.setdefault(n, []).extend(es)
            defs.setdefault("", []).extend([s.lo, s.hi])
    return defs


def _agu_slice_vars(p: Program, pe: PE) -> frozenset:
    """Variables the AGU keeps: the backward def-use closure of every owned
    address, loop bound, and speculated condition."""
    stmts = [ps.stmt for ps in pe.pre] + \
            (list(pe.leaf.body) if pe.leaf else []) + \
            [ps.stmt for ps in pe.post]
    defs = _definitions(stmts)
    for loop in pe.chain:
        defs.setdefault("", []).extend([loop.lo, loop.hi])
        for r in loop.recs:
            exprs = [r.init]
            if r.update is not None:
                exprs.append(r.update)
            defs.setdefault(r.name, []).extend(exprs)

    roots = set()
    for op in (p.op(i) for i in pe.op_ids):
        roots |= expr_vars(op.addr)
    for e in defs.get("", []):
        roots |= expr_vars(e)
    for loop in pe.chain:
        roots.add(loop.index)

    needed, frontier = set(), set(roots)
    while frontier:
        v = frontier.pop()
        if v in needed:
            continue
        needed.add(v)
        for e in defs.get(v, []):
            frontier |= expr_vars(e) - needed
    return frozenset(needed)


# ---------------------------------------------------------------------------
# cross-PE scalar channels

def _placed_names_defined(pe: PE):
    """Names defined in statements exclusively owned by this PE."""
    stmts = [ps.stmt for ps in pe.pre] + \
            (list(pe.leaf.body) if pe.leaf else []) + \
            [ps.stmt for ps in pe.post]
    names = set(_definitions(stmts)) - {""}
    if pe.leaf is not None:
        for r in pe.leaf.recs:
            names.add(r.name)
        names.add(pe.leaf.index)
    return names


def _names_used(p: Program, pe: PE) -> set:
    used = set()

    def scan(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                used.update(expr_vars(s.expr))
            elif isinstance(s, MemOp):
                used.update(expr_vars(s.addr))
                if s.value is not None:
                    used.update(expr_vars(s.value))
            elif isinstance(s, If):
                used.update(expr_vars(s.cond))
                scan(s.then)
                scan(s.els)
            elif isinstance(s, Loop):
                used.update(expr_vars(s.lo) | expr_vars(s.hi))
                for r in s.recs:
                    used.update(expr_vars(r.init))
                    if r.update is not None:
                        used.update(expr_vars(r.update))
                scan(s.body)

    scan([ps.stmt for ps in pe.pre])
    if pe.leaf is not None:
        scan([pe.leaf])
    scan([ps.stmt for ps in pe.post])
    for c in pe.conds:
        used.update(expr_vars(c))
    return used


def _build_channels(p: Program, pes) -> list[Channel]:
    defined_by = {}
    for pe in pes:
        for n in _placed_names_defined(pe):
            defined_by.setdefault(n, pe.id)  # first (topological) definer
    channels = []
    for pe in pes:
        local = _placed_names_defined(pe)
        for n in sorted(_names_used(p, pe)):
            owner = defined_by.get(n)
            if owner is None or owner == pe.id or n in local:
                continue
            if owner > pe.id:
                raise DecoupleError(
                    f"cyclic cross-PE scalar dependency on {n!r} "
                    f"(defined in PE {owner}, used in PE {pe.id})")
            channels.append(Channel(len(channels), owner, pe.id, n))
    return channels


# ---------------------------------------------------------------------------
# data unit port assignment

def assign_du_ports(p: Program, pes) -> tuple[list[DU], dict]:
    readonly = {a.name for a in p.arrays if a.readonly}
    by_array: dict[str, list[int]] = {}
    for op in p.mem_ops():
        by_array.setdefault(op.array, []).append(op.id)
    # embedded loads in addresses/bounds/values use plain read ports too
    order = [a.name for a in p.arrays if a.name in by_array]
    dus, bindings = [], {}
    for name in order:
        du = DU(len(dus), name, name not in readonly, {})
        for port, op_id in enumerate(sorted(by_array[name])):
            du.ports[op_id] = port
            bindings[op_id] = (du.id, port)
        dus.append(du)
    return dus, bindings


# ---------------------------------------------------------------------------
# stable textual dump

def dump(p: Program, g: PEGraph) -> str:
    lines = []
    for pe in g.pes:
        leaf = pe.leaf.index if pe.leaf else "-"
        ops = ",".join(str(i) for i in pe.op_ids)
        agu = ",".join(sorted(pe.agu_vars))
        lines.append(f"pe {pe.id}: leaf={leaf} depth={len(pe.chain)} "
                     f"ops=[{ops}] agu=[{agu}]")
        for m in pe.marks:
            lines.append(f"  speculate op={m.op_id} hoisted={int(m.hoisted)}")
    for c in g.channels:
        lines.append(f"channel {c.fifo_id}: pe{c.producer} -> "
                     f"pe{c.consumer} var={c.var}")
    for du in g.dus:
        ports = " ".join(f"op{i}->port{du.ports[i]}"
                         for i in sorted(du.ports))
        kind = "protected" if du.protected else "plain"
        lines.append(f"du {du.id}: array={du.array} {kind} {ports}")
    return "\n".join(lines) + "\n"
