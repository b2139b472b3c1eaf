"""Chain-of-recurrences construction and address monotonicity analysis.

A CR node is one of:
  Leaf     -- a loop-invariant integer expression over symbols and constants
  AddRec   -- {base, +, step} owned by a loop depth
  MulRec   -- {base, x, step} owned by a loop depth
  UNANALYZABLE -- absorbing element for anything the algebra cannot express

Depths are 1-based and strictly increase from the outermost loop inward;
along any base chain the owning depths strictly decrease.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import (Assign, Bin, If, Load, Loop, MemOp, Num, Program, Var,
                 print_expr)

# iteration-count stand-in when a loop bound cannot be analyzed
UNKNOWN_TRIP = 1 << 20
_EXP_CAP = 128


class _Unanalyzable:
    _instance = None
    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance
    def __repr__(self):
        return "unanalyzable"

UNANALYZABLE = _Unanalyzable()


@dataclass(frozen=True)
class Leaf:
    expr: object  # Num | Var | Bin over symbols only


@dataclass(frozen=True)
class AddRec:
    base: object
    step: object
    depth: int


@dataclass(frozen=True)
class MulRec:
    base: object
    step: object
    depth: int


def Const(v: int) -> Leaf:
    return Leaf(Num(v))


def Symbol(name: str) -> Leaf:
    return Leaf(Var(name))


def cr_str(cr) -> str:
    if cr is UNANALYZABLE:
        return "unanalyzable"
    if isinstance(cr, Leaf):
        return print_expr(cr.expr)
    op = "+" if isinstance(cr, AddRec) else "×"
    return f"{{{cr_str(cr.base)},{op},{cr_str(cr.step)}}}"


def max_depth(cr) -> int:
    if isinstance(cr, (AddRec, MulRec)):
        return max(cr.depth, max_depth(cr.base), max_depth(cr.step))
    return 0


def _leaf_op(op, a: Leaf, b: Leaf) -> Leaf:
    ea, eb = a.expr, b.expr
    if isinstance(ea, Num) and isinstance(eb, Num):
        v = {"+": ea.value + eb.value,
             "-": ea.value - eb.value,
             "*": ea.value * eb.value}[op]
        return Leaf(Num(v))
    if op == "+" and isinstance(ea, Num) and ea.value == 0:
        return b
    if op in ("+", "-") and isinstance(eb, Num) and eb.value == 0:
        return a
    if op == "*":
        if isinstance(ea, Num) and ea.value == 1:
            return b
        if isinstance(eb, Num) and eb.value == 1:
            return a
        if (isinstance(ea, Num) and ea.value == 0) or \
           (isinstance(eb, Num) and eb.value == 0):
            return Leaf(Num(0))
    return Leaf(Bin(op, ea, eb))


def _is_const(x, v: int) -> bool:
    return (isinstance(x, Leaf) and isinstance(x.expr, Num)
            and x.expr.value == v)


def cr_add(a, b):
    if a is UNANALYZABLE or b is UNANALYZABLE:
        return UNANALYZABLE
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if isinstance(a, Leaf) and isinstance(b, Leaf):
        return _leaf_op("+", a, b)
    # orient so that `a` is the deeper recurrence
    da, db = max_depth(a), max_depth(b)
    if db > da:
        a, b = b, a
        da, db = db, da
    if isinstance(a, AddRec):
        if isinstance(b, AddRec) and b.depth == a.depth:
            return AddRec(cr_add(a.base, b.base), cr_add(a.step, b.step), a.depth)
        if max_depth(b) < a.depth:  # b invariant w.r.t. a's loop
            return AddRec(cr_add(a.base, b), a.step, a.depth)
    return UNANALYZABLE


def cr_neg(a):
    return cr_mul(a, Const(-1))


def cr_sub(a, b):
    return cr_add(a, cr_neg(b))


def cr_mul(a, b):
    if a is UNANALYZABLE or b is UNANALYZABLE:
        return UNANALYZABLE
    if _is_const(a, 0) or _is_const(b, 0):
        return Const(0)
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if isinstance(a, Leaf) and isinstance(b, Leaf):
        return _leaf_op("*", a, b)
    da, db = max_depth(a), max_depth(b)
    if db > da:
        a, b = b, a
        da, db = db, da
    if isinstance(a, AddRec):
        if max_depth(b) < a.depth:
            return AddRec(cr_mul(a.base, b), cr_mul(a.step, b), a.depth)
        return UNANALYZABLE
    if isinstance(a, MulRec):
        if isinstance(b, MulRec) and b.depth == a.depth:
            return MulRec(cr_mul(a.base, b.base), cr_mul(a.step, b.step), a.depth)
        if max_depth(b) < a.depth:
            return MulRec(cr_mul(a.base, b), a.step, a.depth)
    return UNANALYZABLE


# ---------------------------------------------------------------------------
# pointwise evaluation (test oracle for the algebra)

def cr_eval(cr, ivec: dict[int, int], syms: dict[str, int]) -> int:
    """Evaluate a CR at an iteration vector {depth: 0-based iteration}."""
    if cr is UNANALYZABLE:
        raise ValueError("cannot evaluate an unanalyzable CR")
    if isinstance(cr, Leaf):
        from .oracle import eval_expr
        return eval_expr(cr.expr, syms, None)
    i = ivec.get(cr.depth, 0)
    acc = cr_eval(cr.base, ivec, syms)
    for t in range(i):
        sub = dict(ivec)
        sub[cr.depth] = t
        s = cr_eval(cr.step, sub, syms)
        acc = acc + s if isinstance(cr, AddRec) else acc * s
    return acc


# ---------------------------------------------------------------------------
# monotonicity predicates

def _syntactic_nonneg(e) -> bool:
    if isinstance(e, Num):
        return e.value >= 0
    if isinstance(e, Var):
        return True  # symbols are non-negative by construction
    if isinstance(e, Bin):
        if e.op in ("+", "*"):
            return _syntactic_nonneg(e.lhs) and _syntactic_nonneg(e.rhs)
        if e.op == "-":
            return isinstance(e.rhs, Num) and e.rhs.value <= 0 \
                and _syntactic_nonneg(e.lhs)
    return False


def _syntactic_ge_one(e) -> bool:
    if isinstance(e, Num):
        return e.value >= 1
    if isinstance(e, Bin):
        if e.op == "+":
            return (_syntactic_ge_one(e.lhs) and _syntactic_nonneg(e.rhs)) or \
                   (_syntactic_nonneg(e.lhs) and _syntactic_ge_one(e.rhs))
        if e.op == "*":
            return _syntactic_ge_one(e.lhs) and _syntactic_ge_one(e.rhs)
    return False


def cr_nonneg(cr) -> bool:
    if isinstance(cr, Leaf):
        return _syntactic_nonneg(cr.expr)
    if isinstance(cr, AddRec):
        return cr_nonneg(cr.base) and cr_nonneg(cr.step)
    if isinstance(cr, MulRec):
        return cr_nonneg(cr.base) and cr_nonneg(cr.step)
    return False


def _cr_ge_one(cr) -> bool:
    if isinstance(cr, Leaf):
        return _syntactic_ge_one(cr.expr)
    if isinstance(cr, (AddRec, MulRec)):
        # smallest value occurs at iteration 0 when the CR is monotonic
        return is_monotonic(cr) and _cr_ge_one(cr.base)
    return False


def is_monotonic(cr) -> bool:
    """Monotonically non-decreasing at every owned depth."""
    if cr is UNANALYZABLE:
        return False
    if isinstance(cr, Leaf):
        return True
    if isinstance(cr, AddRec):
        return is_monotonic(cr.base) and is_monotonic(cr.step) \
            and cr_nonneg(cr.step)
    if isinstance(cr, MulRec):
        return is_monotonic(cr.base) and is_monotonic(cr.step) \
            and cr_nonneg(cr.base) and _cr_ge_one(cr.step)
    return False


def is_affine(cr) -> bool:
    if cr is UNANALYZABLE:
        return False
    if isinstance(cr, Leaf):
        return True
    if isinstance(cr, AddRec):
        return isinstance(cr.step, Leaf) and is_affine(cr.base)
    return False  # multiply recurrences are never affine


def innermost_monotonic(cr, depth: int) -> bool:
    """Non-decreasing within one activation of the depth-`depth` loop.

    Only the recurrence owned by the innermost depth matters; shallower
    resets are the business of detect_nonmonotonic_depths.
    """
    if cr is UNANALYZABLE:
        return False
    rec = _rec_at_depth(cr, depth)
    if rec is None:
        return True  # invariant within the innermost loop
    if isinstance(rec, AddRec):
        return cr_nonneg(rec.step) and is_monotonic(rec.step)
    return cr_nonneg(rec.base) and _cr_ge_one(rec.step)


def _rec_at_depth(cr, depth: int):
    node = cr
    while isinstance(node, (AddRec, MulRec)):
        if node.depth == depth:
            return node
        node = node.base
    return None


def chain_recs(cr) -> dict[int, object]:
    """Recurrences of the main base chain, keyed by owning depth."""
    out = {}
    node = cr
    while isinstance(node, (AddRec, MulRec)):
        out[node.depth] = node
        node = node.base
    return out


# ---------------------------------------------------------------------------
# value intervals under maximum symbol substitution

_BIG = 1 << 200


def _expr_max_value(e, sym_max) -> int:
    from .oracle import eval_expr
    return eval_expr(e, sym_max, None)


def cr_interval(cr, sym_max: dict[str, int], trips: dict[int, int]):
    """(min, max) of a CR over its whole iteration domain with every symbol
    substituted by its declared maximum."""
    if cr is UNANALYZABLE:
        return (-_BIG, _BIG)
    if isinstance(cr, Leaf):
        v = _expr_max_value(cr.expr, sym_max)
        return (v, v)
    t = max(trips.get(cr.depth, UNKNOWN_TRIP), 1)
    bmin, bmax = cr_interval(cr.base, sym_max, trips)
    smin, smax = cr_interval(cr.step, sym_max, trips)
    if isinstance(cr, AddRec):
        lo = bmin + min(0, smin * (t - 1))
        hi = bmax + max(0, smax * (t - 1))
        return (lo, hi)
    if smin < 0 or bmin < -_BIG // 2:
        return (-_BIG, _BIG)
    e = min(t - 1, _EXP_CAP)
    cands = [b * (s ** ex) for b in (bmin, bmax) for s in (smin, smax)
             for ex in (0, e)]
    return (min(cands), max(cands))


def detect_nonmonotonic_depths(cr, n: int, sym_max: dict[str, int],
                               trips: dict[int, int]) -> frozenset[int]:
    """Outer depths k (1 <= k < n) whose advancement can lower the address.

    Depth k is flagged when no recurrence exists for it, or when some deeper
    loop's full execution can contribute more to the address than one
    k-iteration adds (steps and trip counts taken at symbol maxima)."""
    if cr is UNANALYZABLE:
        return frozenset(range(1, n))
    recs = chain_recs(cr)
    flagged = set()
    for k in range(1, n):
        if k not in recs:
            flagged.add(k)
            continue
        lhs = _min_step_contribution(recs[k], sym_max, trips)
        for j in range(k + 1, n + 1):
            rhs = _max_activation_contribution(recs.get(j), sym_max, trips, j)
            if lhs < rhs:
                flagged.add(k)
                break
    return frozenset(flagged)


def _min_step_contribution(rec, sym_max, trips) -> int:
    if isinstance(rec, AddRec):
        return cr_interval(rec.step, sym_max, trips)[0]
    # multiply recurrence: one iteration adds at least base_min*(step_min - 1)
    bmin, _ = cr_interval(rec.base, sym_max, trips)
    smin, _ = cr_interval(rec.step, sym_max, trips)
    if bmin < 0 or smin < 1:
        return -_BIG
    return bmin * (smin - 1)


def _max_activation_contribution(rec, sym_max, trips, depth) -> int:
    if rec is None:
        return 0
    t = max(trips.get(depth, UNKNOWN_TRIP), 1)
    if isinstance(rec, AddRec):
        _, smax = cr_interval(rec.step, sym_max, trips)
        return smax * t
    lo, hi = cr_interval(rec, sym_max, trips)
    return hi - lo


# ---------------------------------------------------------------------------
# building CRs from programs

def build_cr(addr, chain: list[Loop], env: dict[str, object], syms) -> object:
    """CR of an address expression under a loop chain and a CR environment
    mapping in-scope variables (indices, recurrences, assigns) to CRs."""
    if isinstance(addr, Num):
        return Const(addr.value)
    if isinstance(addr, Var):
        if addr.name in env:
            return env[addr.name]
        if any(s.name == addr.name for s in syms):
            return Symbol(addr.name)
        return UNANALYZABLE
    if isinstance(addr, Load):
        return UNANALYZABLE
    if isinstance(addr, Bin):
        a = build_cr(addr.lhs, chain, env, syms)
        b = build_cr(addr.rhs, chain, env, syms)
        if addr.op == "+":
            return cr_add(a, b)
        if addr.op == "-":
            return cr_sub(a, b)
        if addr.op == "*":
            return cr_mul(a, b)
        return UNANALYZABLE
    return UNANALYZABLE


@dataclass(frozen=True)
class MonotonicityReport:
    op_id: int
    cr: object
    depth: int
    analyzable: bool
    affine: bool
    monotonic: bool               # every owned depth non-decreasing
    innermost_monotonic: bool     # possibly via annotation
    annotated: bool
    non_monotonic_depths: frozenset[int]


def analyze_program(p: Program) -> dict[int, MonotonicityReport]:
    sym_max = {s.name: s.max_value for s in p.symbols}
    reports: dict[int, MonotonicityReport] = {}

    def trip_bound(loop, chain, env):
        lo = build_cr(loop.lo, chain, env, p.symbols)
        hi = build_cr(loop.hi, chain, env, p.symbols)
        trips = {l.depth: UNKNOWN_TRIP for l in chain}
        lo_iv = cr_interval(lo, sym_max, trips)
        hi_iv = cr_interval(hi, sym_max, trips)
        t = hi_iv[1] - lo_iv[0]
        if not 0 <= t <= UNKNOWN_TRIP:
            return UNKNOWN_TRIP
        return t

    def walk(stmts, chain, env, trips):
        env = dict(env)
        for s in stmts:
            if isinstance(s, Assign):
                env[s.name] = build_cr(s.expr, chain, env, p.symbols)
            elif isinstance(s, MemOp):
                cr = build_cr(s.addr, chain, env, p.symbols)
                reports[s.id] = _report(s, cr, len(chain), sym_max, trips)
                if s.let_name:
                    env[s.let_name] = UNANALYZABLE
            elif isinstance(s, If):
                env.update(walk(s.then, chain, env, trips))
                env.update(walk(s.els, chain, env, trips))
            elif isinstance(s, Loop):
                d = len(chain) + 1
                t = trip_bound(s, chain, env)
                inner = dict(env)
                inner[s.index] = AddRec(build_cr(s.lo, chain, env, p.symbols),
                                        Const(1), d)
                for r in s.recs:
                    init = build_cr(r.init, chain, inner, p.symbols)
                    if r.kind == "+":
                        inner[r.name] = AddRec(init, Const(r.amount), d)
                    elif r.kind == "*":
                        inner[r.name] = MulRec(init, Const(r.amount), d)
                    else:
                        inner[r.name] = UNANALYZABLE
                walk(s.body, chain + [s], inner, {**trips, d: t})
                for r in s.recs:
                    env[r.name] = UNANALYZABLE  # final value: not a recurrence here
        return env

    walk(p.body, [], {}, {})
    return reports


def _report(op: MemOp, cr, n: int, sym_max, trips) -> MonotonicityReport:
    analyzable = cr is not UNANALYZABLE
    affine = is_affine(cr)
    mono = is_monotonic(cr)
    inner_ok = innermost_monotonic(cr, n) if analyzable else False
    nm = detect_nonmonotonic_depths(cr, n, sym_max, trips)
    annotated = op.annotation is not None
    if op.annotation == "all":
        inner_ok = True
        nm = frozenset()
    elif isinstance(op.annotation, frozenset):
        if n in op.annotation:
            inner_ok = True
        nm = frozenset(nm - op.annotation)
    return MonotonicityReport(op.id, cr, n, analyzable, affine, mono,
                              inner_ok, annotated, nm)
