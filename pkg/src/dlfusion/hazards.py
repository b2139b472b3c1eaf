"""Hazard pair enumeration, transitive pruning, and safety-check synthesis.

A pair (a, b) means: requests of destination op `a` must be checked at
runtime against the progress of source op `b` on the same array.  Pairs
where the source follows the destination topologically exist via loop
backedges and are kept only when the two ops share a loop.

Pruning exploits transitivity: if c precedes b precedes a, then a checking
b and b checking c makes a-against-c redundant.  Constructively, each
destination keeps, per shared loop depth, only the nearest conflicting
source that cyclically precedes it.  WAR pairs whose written value depends
on the read value are dropped afterwards: dataflow already orders them.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .ir import Assign, If, Loop, MemOp, Program, expr_vars, topo_order
from .schedule import configure_comparator, shared_loops


@dataclass(frozen=True)
class HazardPair:
    a: int      # destination op (the one that checks)
    b: int      # source op (the one checked against)
    kind: str   # RAW | WAR | WAW


@dataclass(frozen=True)
class PruneStats:
    pairs_before: int
    pairs_after: int
    pruned_transitive: int
    pruned_war_write_depends_on_read: int

    def __post_init__(self):
        total = (self.pairs_after + self.pruned_transitive +
                 self.pruned_war_write_depends_on_read)
        assert self.pairs_before == total


def _pair_kind(a: MemOp, b: MemOp) -> str:
    if a.kind == "load":
        return "RAW"
    if b.kind == "load":
        return "WAR"
    return "WAW"


def enumerate_pairs(p: Program, op_ids) -> list[HazardPair]:
    """All ordered (dst, src) pairs over one array's ops that may need a
    runtime check, before any pruning.  Load-load pairs never conflict;
    backedge pairs (src topologically after dst) require a shared loop."""
    order = {i: n for n, i in enumerate(topo_order(p))}
    ops = sorted(op_ids, key=order.get)
    pairs = []
    for a in ops:
        for b in ops:
            if a == b:
                continue
            oa, ob = p.op(a), p.op(b)
            if oa.kind == "load" and ob.kind == "load":
                continue
            if order[b] > order[a] and shared_loops(p, a, b) == 0:
                continue  # no backedge path from b to a
            pairs.append(HazardPair(a, b, _pair_kind(oa, ob)))
    return pairs


def _value_dependencies(p: Program) -> dict[int, set[int]]:
    """store op id -> set of load op ids whose value feeds the stored value
    (closure through assignments and scalar recurrences)."""
    feeds: dict[str, set[str]] = {}
    let_of: dict[str, int] = {}

    def note(name, expr):
        feeds.setdefault(name, set()).update(expr_vars(expr))

    def walk(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                note(s.name, s.expr)
            elif isinstance(s, MemOp) and s.let_name:
                let_of[s.let_name] = s.id
            elif isinstance(s, If):
                walk(s.then)
                walk(s.els)
            elif isinstance(s, Loop):
                for r in s.recs:
                    note(r.name, r.init)
                    if r.update is not None:
                        note(r.name, r.update)
                walk(s.body)

    walk(p.body)

    def closure(names):
        seen, todo = set(), set(names)
        while todo:
            n = todo.pop()
            if n in seen:
                continue
            seen.add(n)
            todo |= feeds.get(n, set()) - seen
        return seen

    out = {}
    for op in p.mem_ops():
        if op.kind == "store":
            deps = closure(expr_vars(op.value))
            out[op.id] = {let_of[n] for n in deps if n in let_of}
    return out


def prune_pairs(p: Program, pairs: list[HazardPair],
                forwarding: bool = False):
    """Transitive pruning plus the WAR-dataflow filter.

    With forwarding enabled, forwarded loads may complete without the DRAM
    ACK that justified pruning a WAW pair, so transitively pruned WAW pairs
    between stores that both precede a checking load are reinstated
    (conservative)."""
    before = len(pairs)
    order = {i: n for n, i in enumerate(topo_order(p))}
    by_dst: dict[int, list[HazardPair]] = {}
    for pr in pairs:
        by_dst.setdefault(pr.a, []).append(pr)

    kept: list[HazardPair] = []
    kept_keys = set()
    for a, cands in sorted(by_dst.items(), key=lambda kv: order[kv[0]]):
        depths = {pr.b: shared_loops(p, a, pr.b) for pr in cands}
        max_d = max(depths.values())
        for d in range(max_d, -1, -1):
            if d == 0:
                group = [pr for pr in cands if depths[pr.b] == 0]
            else:
                group = [pr for pr in cands if depths[pr.b] >= d]
            if not group:
                continue
            preceding = [pr for pr in group if order[pr.b] < order[a]]
            pool = preceding if preceding else (group if d > 0 else [])
            if not pool:
                continue
            pick = max(pool, key=lambda pr: order[pr.b])
            if (pick.a, pick.b) not in kept_keys:
                kept_keys.add((pick.a, pick.b))
                kept.append(pick)

    transitive = before - len(kept)

    deps = _value_dependencies(p)
    war_pruned = [pr for pr in kept
                  if pr.kind == "WAR" and pr.b in deps.get(pr.a, ())]
    kept = [pr for pr in kept if pr not in war_pruned]

    if forwarding:
        raw_loads = {pr.a for pr in kept if pr.kind == "RAW"}
        kept_now = set(kept_keys)
        for pr in pairs:
            if pr.kind != "WAW" or (pr.a, pr.b) in kept_now:
                continue
            if any(order[pr.a] < order[ld] and order[pr.b] < order[ld]
                   for ld in raw_loads):
                kept.append(pr)
                kept_now.add((pr.a, pr.b))
                transitive -= 1

    stats = PruneStats(before, len(kept), transitive, len(war_pruned))
    return kept, stats


# ---------------------------------------------------------------------------
# check synthesis

@dataclass(frozen=True)
class HazardCheckConfig:
    a: int
    b: int
    kind: str
    k: int                       # innermost shared loop depth (0 = none)
    le: bool                     # schedule relation: <= if a precedes b
    delta: int                   # schedule-equality offset
    fallback: bool               # source not monotonic: program-order only
    address_check: bool          # req.addr_a < ack.addr_b route enabled
    l: int | None                # deepest non-monotonic depth of b <= k
    lastiter_depths: frozenset   # non-monotonic depths of b in (k, m)
    forwarding: bool             # RAW: check against b's next request
    no_dependence: bool          # intra-loop RAW hint from the AGU


def synthesize_check(p: Program, pair: HazardPair, reports,
                     forwarding: bool = False) -> HazardCheckConfig:
    cfg = configure_comparator(p, pair.a, pair.b)
    rb = reports[pair.b]
    m = rb.depth
    fallback = not rb.innermost_monotonic
    nm = rb.non_monotonic_depths
    l = max((d for d in nm if d <= cfg.k), default=None)
    if cfg.k == 0:
        lastiter = frozenset(d for d in nm if d < m)
        l = None
    else:
        lastiter = frozenset(d for d in nm if cfg.k < d < m)
    fwd = forwarding and pair.kind == "RAW" and not fallback
    intra = (cfg.k > 0 and cfg.k == rb.depth
             and cfg.k == reports[pair.a].depth)
    nodep = pair.kind == "RAW" and intra and not fallback
    return HazardCheckConfig(pair.a, pair.b, pair.kind, cfg.k, cfg.le,
                             cfg.delta, fallback, not fallback, l, lastiter,
                             fwd, nodep)


def _po_only_dsts(p: Program, pairs_before, kept) -> set[int]:
    """Destinations whose checks must not use the address route.

    Transitive pruning justifies dropping (a, c) by chaining a's check on b
    with b's check on c.  The chain is only airtight for the program-order
    route: an address comparison against b's progress says nothing about
    the addresses c still has in flight.  A pruned source c is harmless
    when dataflow orders it anyway: a WAR source whose value feeds a's
    stored value, or a WAR source read in a's own innermost loop (the
    compute unit consumes load values in program order before producing
    the store value).  Any other pruned source forces the program-order
    route for all of a's checks."""
    deps = _value_dependencies(p)
    retained: dict[int, set[int]] = {}
    for pr in kept:
        retained.setdefault(pr.a, set()).add(pr.b)
    out = set()
    for pr in pairs_before:
        if pr.b in retained.get(pr.a, ()):
            continue
        if pr.kind == "WAR":
            if pr.b in deps.get(pr.a, ()):
                continue
            ca, cb = p.loops_of(pr.a), p.loops_of(pr.b)
            if ca and cb and ca[-1] is cb[-1]:
                continue
        out.add(pr.a)
    return out


@dataclass
class DuAnalysis:
    du_id: int
    array: str
    pairs_before: list
    pairs: list
    checks: list
    stats: PruneStats


def analyze_hazards(p: Program, reports=None, forwarding: bool = False):
    """Full static hazard analysis: per-array enumeration, pruning, and
    check synthesis.  Returns (DuAnalysis list, aggregate PruneStats)."""
    from .crs import analyze_program
    from .decouple import decouple
    if reports is None:
        reports = analyze_program(p)
    g = decouple(p)
    dus = []
    agg = [0, 0, 0, 0]
    for du in g.dus:
        ids = sorted(du.ports)
        if not du.protected:
            dus.append(DuAnalysis(du.id, du.array, [], [], [],
                                  PruneStats(0, 0, 0, 0)))
            continue
        pairs0 = enumerate_pairs(p, ids)
        pairs, stats = prune_pairs(p, pairs0, forwarding)
        po_only = _po_only_dsts(p, pairs0, pairs)
        checks = []
        for pr in pairs:
            c = synthesize_check(p, pr, reports, forwarding)
            if pr.a in po_only:
                c = replace(c, address_check=False, no_dependence=False,
                            forwarding=False)
            checks.append(c)
        dus.append(DuAnalysis(du.id, du.array, pairs0, pairs, checks, stats))
        agg[0] += stats.pairs_before
        agg[1] += stats.pairs_after
        agg[2] += stats.pruned_transitive
        agg[3] += stats.pruned_war_write_depends_on_read
    return dus, PruneStats(*agg)
