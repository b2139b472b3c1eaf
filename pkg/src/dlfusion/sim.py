"""Cycle-approximate simulator of the decoupled pipeline.

Each PE runs an address-generation walker (AGU) and a compute walker (CU)
as Python generators.  The AGU races ahead emitting (address, schedule)
requests into per-op port FIFOs; the CU consumes load values and produces
store values (with valid bits for speculated ops) in the same order.  Each
data-unit port holds ACK registers, a next-request view, and a pending
buffer; a request issues only after every configured hazard check passes.
A per-port coalescing LSU groups requests into aligned DRAM lines and
acknowledges a whole burst `latency` cycles after it is flushed.

Model granularity: one loop-body invocation per cycle for each AGU and CU,
one issue per port per cycle, checks cost one cycle of request age.
Stores commit to backing memory at issue; loads capture their value at
issue and deliver it to the CU at ACK.  Mis-speculated (invalid) stores
never commit; they retire from the head of the pending buffer, updating
the ACK registers immediately.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from .crs import analyze_program
from .decouple import decouple
from .hazards import analyze_hazards
from .ir import Assign, If, Loop, MemOp, Program, expr_vars
from .oracle import eval_expr, initial_memory
from .schedule import (POISON, SENTINEL, Emission, Schedule, agu_emissions,
                       sentinel_schedule, trace_line)


class SimError(Exception):
    pass


@dataclass
class SimConfig:
    mode: str = "fused"              # fused | sequential
    forwarding: bool = True          # FUS2 when on, FUS1 when off
    speculation: bool = True         # off: invalid stores never retire
    fifo_depth: int = 256            # AGU->DU request / CU->DU value FIFOs
    channel_depth: int = 16
    pending_capacity: int = 128
    line_words: int = 16
    latency: int = 100
    idle_timeout: int = 16
    max_cycles: int = 10_000_000
    use_pruning: bool = True
    symbols: dict | None = None
    record_issues: frozenset = frozenset()
    trace: bool = False


@dataclass
class SimStats:
    cycles: int = 0
    dram_requests: int = 0
    bursts: int = 0
    forwarded_loads: int = 0
    stalls: dict = field(default_factory=lambda: {"RAW": 0, "WAR": 0,
                                                  "WAW": 0})
    per_pe: list = field(default_factory=list)
    deadlock: bool = False
    issue_cycles: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = {"cycles": self.cycles, "dram_requests": self.dram_requests,
             "bursts": self.bursts, "forwarded_loads": self.forwarded_loads,
             "stalls": {k.lower(): v for k, v in self.stalls.items()},
             "deadlock": self.deadlock, "per_pe": self.per_pe}
        return json.dumps(d, sort_keys=True)


@dataclass
class _Request:
    op_id: int
    addr: int
    sched: Schedule
    nodep: dict         # src op id -> NoDependence bit
    arrived: int
    gseq: int = 0       # global program-order rank of the emission


@dataclass
class _Pending:
    addr: int
    sched: Schedule
    value: int | None
    valid: bool
    is_store: bool
    ready_at: int | None = None   # None while awaiting a burst flush


class _Port:
    def __init__(self, op: MemOp, pe_id: int, cfg: SimConfig):
        self.op = op
        self.pe_id = pe_id
        self.cfg = cfg
        self.reqs: deque[_Request] = deque()
        self.vals: deque = deque()       # CU->DU (value, valid) for stores
        self.out: deque = deque()        # DU->CU load values
        self.pending: deque[_Pending] = deque()
        self.ack_addr: int | None = None
        self.ack_sched = Schedule((0,) * 8, (False,) * 8)
        self.agu_done = False
        # coalescing LSU state
        self.open_line: int | None = None
        self.open_entries: list[_Pending] = []
        self.last_arrival = 0
        self.completions: list = []      # (cycle, [entries]) in issue order

    @property
    def no_pending_ack(self) -> bool:
        return not self.pending

    @property
    def finished(self) -> bool:
        return self.agu_done and not self.pending and not self.reqs

    def next_req(self) -> _Request | None:
        return self.reqs[0] if self.reqs else None


def _line(addr: int, words: int) -> int:
    return addr // words


class Simulator:
    def __init__(self, p: Program, config: SimConfig | None = None):
        self.p = p
        self.cfg = config or SimConfig()
        self.reports = analyze_program(p)
        self.graph = decouple(p)
        self.du_analyses, self.prune_stats = analyze_hazards(
            p, self.reports, self.cfg.forwarding)
        if not self.cfg.use_pruning:
            checks = []
            for du in self.du_analyses:
                from .hazards import synthesize_check
                checks += [synthesize_check(p, pr, self.reports,
                                            self.cfg.forwarding)
                           for pr in du.pairs_before]
            self.checks = checks
        else:
            self.checks = [c for du in self.du_analyses for c in du.checks]
        self.checks_by_dst: dict[int, list] = {}
        for c in self.checks:
            self.checks_by_dst.setdefault(c.a, []).append(c)
        self.stats = SimStats()
        self.trace_lines: list[str] = []

    # ------------------------------------------------------------------
    def run(self, memory=None, seed=None):
        p, cfg = self.p, self.cfg
        mem = {k: list(v)
               for k, v in (memory or initial_memory(p, seed)).items()}
        self.mem = mem
        arrays = {a.name: a for a in p.arrays}

        ports: dict[int, _Port] = {}
        pe_of_op: dict[int, int] = {}
        for pe in self.graph.pes:
            for oid in pe.op_ids:
                ports[oid] = _Port(p.op(oid), pe.id, cfg)
                pe_of_op[oid] = pe.id
        self.ports = ports

        intra_src = {}  # load op -> src store ids needing a NoDependence bit
        for c in self.checks:
            if c.no_dependence:
                intra_src.setdefault(c.a, set()).add(c.b)

        channels = {c.fifo_id: deque() for c in self.graph.channels}
        chans_in = {}
        chans_out = {}
        for c in self.graph.channels:
            chans_in.setdefault(c.consumer, []).append(c)
            chans_out.setdefault(c.producer, []).append(c)

        agus = {}
        cus = {}
        for pe in self.graph.pes:
            if pe.op_ids:
                gen = agu_emissions(p, list(pe.op_ids), memory=mem,
                                    symbols=cfg.symbols, speculative=True)
                agus[pe.id] = _Batcher(gen)
            cus[pe.id] = _CuState(self._cu_walk(
                pe, mem, chans_in.get(pe.id, []), chans_out.get(pe.id, [])))

        for op_id in cfg.record_issues:
            self.stats.issue_cycles[op_id] = []

        now = 0
        sequential = cfg.mode == "sequential"
        seq_active: int | None = None  # sequential mode: PE holding the turn
        pe_done_cycle: dict[int, int] = {}

        def next_turn():
            """PE owning the request with the globally smallest program-
            order rank (its front request is the next to execute)."""
            best = None
            for pe in self.graph.pes:
                g = None
                for i in pe.op_ids:
                    r = ports[i].next_req()
                    if r is not None:
                        g = r.gseq if g is None else min(g, r.gseq)
                agu = agus.get(pe.id)
                if agu and not agu.done:
                    ag = agu.next_gseq()
                    g = ag if g is None else min(g, ag)
                if g is not None and (best is None or g < best[0]):
                    best = (g, pe.id)
            return None if best is None else best[1]

        def drained(pe_id):
            pe = self.graph.pes[pe_id]
            return not any(ports[i].pending for i in pe.op_ids)

        def pe_done(pe):
            return (cus[pe.id].done and
                    (pe.id not in agus or agus[pe.id].done) and
                    all(ports[i].finished for i in pe.op_ids))

        while True:
            if now > cfg.max_cycles:
                self.stats.deadlock = True
                self.stats.cycles = now
                return mem, self.stats
            progress = False

            # 1. deliver ACKs: timeout flushes then ready heads
            for port in ports.values():
                if (port.open_entries and
                        now - port.last_arrival >= cfg.idle_timeout):
                    self._flush(port, now)
                while port.completions and port.completions[0][0] <= now:
                    _, entries = port.completions.pop(0)
                    for e in entries:
                        if e.ready_at is None:
                            e.ready_at = now
                while port.pending:
                    head = port.pending[0]
                    if head.ready_at is None or head.ready_at > now:
                        break
                    if not cfg.speculation and head.is_store \
                            and not head.valid:
                        break  # test hook: mis-speculation never retires
                    port.pending.popleft()
                    port.ack_addr = head.addr
                    port.ack_sched = head.sched
                    if not head.is_store:
                        port.out.append(head.value)
                    progress = True

            # 2. CU and AGU advancement per PE
            for pe in self.graph.pes:
                cu = cus[pe.id]
                if not cu.done and self._cu_step(cu, ports, channels, now):
                    progress = True
                agu = agus.get(pe.id)
                if agu and not agu.done and \
                        self._agu_step(agu, pe, ports, intra_src, now):
                    progress = True

            # 3. port issue (sequential mode: one PE at a time, switched
            # once its outstanding requests drain)
            if sequential:
                nxt = next_turn()
                if seq_active is None or (nxt is not None and
                                          nxt != seq_active and
                                          drained(seq_active)):
                    seq_active = nxt
            for port in ports.values():
                if sequential and port.pe_id != seq_active:
                    nr = port.next_req()
                    if nr is None or nr.addr >= 0:
                        continue  # only sentinels retire out of turn
                r = self._issue(port, ports, mem, arrays, now)
                if r:
                    progress = True

            done = True
            for pe in self.graph.pes:
                if pe.id in pe_done_cycle:
                    continue
                if pe_done(pe):
                    pe_done_cycle[pe.id] = now
                else:
                    done = False
            if done:
                self.stats.cycles = now
                self.stats.per_pe = [pe_done_cycle[pe.id]
                                     for pe in self.graph.pes]
                return mem, self.stats

            if progress:
                now += 1
                continue
            # time skip to the next scheduled event
            events = []
            for port in ports.values():
                if port.completions:
                    events.append(port.completions[0][0])
                if port.open_entries:
                    events.append(port.last_arrival + cfg.idle_timeout)
            future = [e for e in events if e > now]
            if not future:
                self.stats.deadlock = True
                self.stats.cycles = now
                return mem, self.stats
            now = min(future)

    # ------------------------------------------------------------------
    def _agu_step(self, agu, pe, ports, intra_src, now) -> bool:
        batch = agu.peek()
        if batch is None:
            return False
        # all destination FIFOs must have room
        for e in batch:
            if len(ports[e.op_id].reqs) >= self.cfg.fifo_depth:
                return False
        for e in batch:
            port = ports[e.op_id]
            if e.kind == "sentinel":
                port.reqs.append(_Request(e.op_id, -1, e.schedule, {}, now,
                                          e.gseq))
            else:
                nodep = {}
                for src in intra_src.get(e.op_id, ()):
                    last = agu.last_store_addr.get(src)
                    nodep[src] = last is not None and e.addr > last
                port.reqs.append(_Request(e.op_id, e.addr, e.schedule,
                                          nodep, now, e.gseq))
                if port.op.is_store:
                    agu.last_store_addr[e.op_id] = e.addr
            if self.cfg.trace:
                self.trace_lines.append(trace_line(e))
        agu.pop()
        return True

    def _cu_step(self, cu, ports, channels, now) -> bool:
        """Advance the CU until its next cycle boundary or until blocked."""
        progress = False
        while True:
            act = cu.current
            if act is None:
                return progress
            kind = act[0]
            if kind == "tick":
                cu.advance(None)
                return True
            if kind == "load":
                port = ports[act[1]]
                if not port.out:
                    return progress
                cu.advance(port.out.popleft())
            elif kind == "store":
                port = ports[act[1]]
                if len(port.vals) >= self.cfg.fifo_depth:
                    return progress
                port.vals.append((act[2], act[3]))
                cu.advance(None)
            elif kind == "chan_read":
                q = channels[act[1]]
                if not q:
                    return progress
                cu.advance(q.popleft())
            elif kind == "chan_write":
                q = channels[act[1]]
                if len(q) >= self.cfg.channel_depth:
                    return progress
                q.append(act[2])
                cu.advance(None)
            progress = True

    # ------------------------------------------------------------------
    def _issue(self, port: _Port, ports, mem, arrays, now) -> bool:
        req = port.next_req()
        if req is None or now - req.arrived < 1:
            return False
        if req.addr < 0:  # sentinel
            if port.pending:
                return False
            port.reqs.popleft()
            port.ack_sched = sentinel_schedule(len(port.ack_sched.elems))
            port.agu_done = True
            return True
        if len(port.pending) >= self.cfg.pending_capacity:
            return False
        is_store = port.op.is_store
        if is_store and not port.vals:
            return False

        fwd_src = None
        for c in self.checks_by_dst.get(port.op.id, []):
            ok, hit = self._hazard_check(req, ports[c.b], c)
            if not ok:
                self.stats.stalls[c.kind] += 1
                return False
            if hit is not None:
                fwd_src = hit

        port.reqs.popleft()
        value, valid = None, True
        words = mem[port.op.array]
        if is_store:
            value, valid = port.vals.popleft()
            if valid:
                if not 0 <= req.addr < len(words):
                    raise SimError(f"store op {port.op.id}: address "
                                   f"{req.addr} out of bounds")
                words[req.addr] = value
        entry = _Pending(req.addr, req.sched, value, valid, is_store)
        if is_store and not valid:
            entry.ready_at = now  # retires at pending head, no DRAM
        elif not is_store and fwd_src is not None:
            entry.value = fwd_src
            entry.ready_at = now + 1
            self.stats.forwarded_loads += 1
        else:
            if not is_store:
                entry.value = words[req.addr] \
                    if 0 <= req.addr < len(words) else 0
            self._to_dram(port, entry, now)
        port.pending.append(entry)
        if port.op.id in self.stats.issue_cycles:
            self.stats.issue_cycles[port.op.id].append(now)
        return True

    def _to_dram(self, port: _Port, entry: _Pending, now):
        self.stats.dram_requests += 1
        ln = _line(entry.addr, self.cfg.line_words)
        if port.open_line is not None and ln != port.open_line:
            self._flush(port, now)
        if port.open_line is None:
            port.open_line = ln
        port.open_entries.append(entry)
        port.last_arrival = now

    def _flush(self, port: _Port, now):
        if not port.open_entries:
            return
        self.stats.bursts += 1
        port.completions.append((now + self.cfg.latency,
                                 port.open_entries))
        port.open_entries = []
        port.open_line = None

    # ------------------------------------------------------------------
    def _hazard_check(self, req: _Request, bport: _Port, c):
        """Evaluate one Hazard Safety Check.  Returns (safe, forward value
        or None)."""
        if bport.finished:
            return True, None
        breq = bport.next_req()
        b_next_sched = breq.sched if breq else None

        if c.forwarding and breq is not None and breq.addr >= 0:
            # RAW with forwarding: compare against b's next store request
            if c.k > 0:
                ea = req.sched.elem(c.k)
                eb = breq.sched.elem(c.k)
                po = (ea <= eb) if c.le else (ea < eb)
            else:
                po = False
            nar = self._no_addr_reset(req, breq.sched, breq.sched.last_iter,
                                      c)
            nodep = c.no_dependence and req.nodep.get(c.b, False)
            addr_ok = (req.addr < breq.addr) or nodep
            if po or (addr_ok and nar):
                return True, self._search_pending(bport, req.addr)
            return False, None

        # ordinary ACK-register check
        if c.k > 0:
            ea = req.sched.elem(c.k)
            eb = bport.ack_sched.elem(c.k)
            po = (ea <= eb) if c.le else (ea < eb)
            if not po and bport.no_pending_ack and b_next_sched is not None:
                er = b_next_sched.elem(c.k)
                po = (ea <= er) if c.le else (ea < er)
        else:
            po = bport.finished
        if po:
            return True, None
        if not c.address_check:
            return False, None
        nodep = c.no_dependence and req.nodep.get(c.b, False)
        addr_ok = (bport.ack_addr is not None and
                   req.addr < bport.ack_addr) or nodep
        if addr_ok and self._no_addr_reset(
                req, bport.ack_sched, bport.ack_sched.last_iter, c):
            return True, None
        return False, None

    def _no_addr_reset(self, req, b_sched: Schedule, b_last, c) -> bool:
        for d in c.lastiter_depths:
            if b_sched.is_sentinel:
                continue
            if d - 1 >= len(b_last) or not b_last[d - 1]:
                return False
        if c.l is not None:
            # the source's address order only survives within one epoch of
            # its reset loop l: the ack must sit in the same epoch as the
            # request, except when l is the comparator depth itself, where
            # a wrapped pair compares against the previous iteration
            off = c.delta if c.l == c.k else 0
            if req.sched.elem(c.l) != b_sched.elem(c.l) + off:
                return False
        return True

    def _search_pending(self, bport: _Port, addr: int):
        """Youngest valid pending store matching the load address."""
        for e in reversed(bport.pending):
            if e.is_store and e.valid and e.addr == addr:
                return e.value
        return None

    # ------------------------------------------------------------------
    def _cu_walk(self, pe, mem, chans_in, chans_out):
        """Generator of CU actions for one PE, walking the whole program to
        replicate control, with real values for everything computable and
        channel reads for cross-PE scalars."""
        p = self.p
        cfg = self.cfg
        owned = set(pe.op_ids)
        chain_ids = {id(l) for l in pe.chain}
        leaf_id = id(pe.leaf) if pe.leaf is not None else None
        env = {s.name: s.max_value for s in p.symbols}
        env.update(cfg.symbols or {})
        readonly = {a.name for a in p.arrays if a.readonly}

        def ro_load(arr, addr):
            if arr in readonly:
                return mem[arr][addr]
            return POISON

        def ev(e):
            if any(env.get(v, 0) is POISON for v in expr_vars(e)):
                return POISON
            try:
                return eval_expr(e, env, ro_load)
            except TypeError:
                return POISON

        def walk(stmts, guard):
            for s in stmts:
                if isinstance(s, Assign):
                    v = ev(s.expr)
                    if guard:
                        env[s.name] = v
                    elif s.name not in env or env[s.name] is POISON:
                        env[s.name] = v
                elif isinstance(s, MemOp):
                    if s.id in owned:
                        if s.kind == "load":
                            v = yield ("load", s.id)
                            if s.let_name:
                                env[s.let_name] = v
                        else:
                            val = ev(s.value) if guard else 0
                            ok = guard and val is not POISON
                            if guard and val is POISON:
                                raise SimError(
                                    f"op {s.id}: store value not computable")
                            yield ("store", s.id, val if ok else 0, ok)
                    elif s.let_name and s.let_name not in env:
                        env[s.let_name] = POISON
                elif isinstance(s, If):
                    c = ev(s.cond)
                    taken = bool(c) if c is not POISON else False
                    yield from walk(s.then, guard and taken)
                    yield from walk(s.els, guard and not taken)
                elif isinstance(s, Loop):
                    lo, hi = ev(s.lo), ev(s.hi)
                    if lo is POISON or hi is POISON:
                        raise SimError("loop bound not computable in CU")
                    for r in s.recs:
                        env[r.name] = ev(r.init)
                    in_chain = id(s) in chain_ids
                    is_leaf = id(s) == leaf_id
                    for i in range(lo, hi):
                        if in_chain:
                            yield ("tick",)
                        if is_leaf:
                            for ch in chans_in:
                                v = yield ("chan_read", ch.fifo_id)
                                env[ch.var] = v
                        env[s.index] = i
                        yield from walk(s.body, guard)
                        for r in s.recs:
                            cur = env[r.name]
                            if r.kind == "+":
                                nxt = cur + r.amount \
                                    if cur is not POISON else POISON
                            elif r.kind == "*":
                                nxt = cur * r.amount \
                                    if cur is not POISON else POISON
                            else:
                                nxt = ev(r.update)
                            if guard:
                                env[r.name] = nxt
                        if is_leaf:
                            for ch in chans_out:
                                yield ("chan_write", ch.fifo_id,
                                       env.get(ch.var))

        yield from walk(p.body, True)


class _Batcher:
    """Groups consecutive AGU emissions into per-cycle batches; a batch
    closes when an op id repeats (next loop-body invocation)."""

    def __init__(self, gen):
        self.gen = gen
        self.buf: list[Emission] = []
        self.batch: list[Emission] | None = None
        self.exhausted = False
        self.done = False
        self.last_store_addr: dict[int, int] = {}

    def _fill(self):
        if self.batch is not None:
            return
        batch, seen = [], set()
        while True:
            if not self.buf:
                if self.exhausted:
                    break
                try:
                    self.buf.append(next(self.gen))
                except StopIteration:
                    self.exhausted = True
                    continue
            e = self.buf[0]
            if e.op_id in seen:
                break
            seen.add(e.op_id)
            batch.append(self.buf.pop(0))
        self.batch = batch if batch else None
        if self.batch is None and self.exhausted:
            self.done = True

    def peek(self):
        self._fill()
        return self.batch

    def next_gseq(self) -> int:
        self._fill()
        return self.batch[0].gseq if self.batch else SENTINEL

    def pop(self):
        self.batch = None
        self._fill()
        if self.batch is None and self.exhausted:
            self.done = True


class _CuState:
    def __init__(self, gen):
        self.gen = gen
        self.done = False
        try:
            self.current = next(gen)
        except StopIteration:
            self.done = True
            self.current = None

    def advance(self, value):
        try:
            self.current = self.gen.send(value)
        except StopIteration:
            self.done = True
            self.current = None


def run(p: Program, config: SimConfig | None = None, memory=None,
        seed=None):
    """Run a full simulation.  Returns (final memory, SimStats, trace)."""
    sim = Simulator(p, config)
    mem, stats = sim.run(memory=memory, seed=seed)
    return mem, stats, sim.trace_lines
