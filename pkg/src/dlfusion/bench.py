"""Benchmark corpus runner.

Loads the bundled kernel corpus (or any directory of ``.dlf`` programs),
reports structural counts from the decoupling and hazard analyses, and runs
each program in three modes: sequential baseline, fused without store
forwarding (``fus1``), and fused with forwarding (``fus2``).  Every run is
validated against the reference interpreter.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .hazards import analyze_hazards
from .decouple import decouple
from .ir import Program, parse
from .oracle import initial_memory, interpret, memory_digest
from .sim import SimConfig, run

CSV_COLUMNS = [
    "name", "pe", "du", "ld", "st",
    "cycles_seq", "cycles_fus1", "cycles_fus2", "ratio_fus2_seq",
    "pairs_before", "pairs_after", "forwarded_loads", "dram_requests",
]

# display names for bundled kernels whose filenames cannot carry a '+'
_DISPLAY = {"hist_add": "hist+add", "tanh_spmv": "tanh+spmv"}


@dataclass
class BenchRow:
    name: str
    pe: int
    du: int
    ld: str
    st: str
    cycles_seq: int
    cycles_fus1: int
    cycles_fus2: int
    ratio_fus2_seq: float
    pairs_before: int
    pairs_after: int
    forwarded_loads: int
    dram_requests: int
    matched: bool

    def as_csv(self) -> dict:
        d = {k: getattr(self, k) for k in CSV_COLUMNS}
        d["ratio_fus2_seq"] = f"{self.ratio_fus2_seq:.3f}"
        return d


def structural_counts(p: Program):
    """(pe, du, ld, st) where du counts only units with hazard pairs and
    ld/st are slash-joined per-unit port counts in first-access order."""
    g = decouple(p)
    dus, agg = analyze_hazards(p)
    counted = [d for d in dus if d.pairs_before]
    ops = list(p.mem_ops())

    def ports(d, stores):
        return sum(1 for op in ops
                   if op.array == d.array and op.is_store == stores)

    ld = "/".join(str(ports(d, False)) for d in counted)
    st = "/".join(str(ports(d, True)) for d in counted)
    return len(g.pes), len(counted), ld, st, agg


def run_benchmark(name: str, p: Program, seed: int = 1,
                  config: SimConfig | None = None) -> BenchRow:
    base = config or SimConfig()
    pe, du, ld, st, agg = structural_counts(p)
    mem0 = initial_memory(p, seed=seed)
    oracle_mem, _ = interpret(p, {k: list(v) for k, v in mem0.items()},
                              seed=seed)
    digest = memory_digest(oracle_mem)

    cycles = {}
    matched = True
    fwd = dram = 0
    for label, kw in (("seq", {"mode": "sequential"}),
                      ("fus1", {"forwarding": False}),
                      ("fus2", {"forwarding": True})):
        from dataclasses import replace
        cfg = replace(base, **kw)
        mem, stats, _ = run(p, cfg, {k: list(v) for k, v in mem0.items()},
                            seed=seed)
        cycles[label] = stats.cycles
        if stats.deadlock or memory_digest(mem) != digest:
            matched = False
        if label == "fus2":
            fwd = stats.forwarded_loads
            dram = stats.dram_requests
    return BenchRow(
        name=name, pe=pe, du=du, ld=ld, st=st,
        cycles_seq=cycles["seq"], cycles_fus1=cycles["fus1"],
        cycles_fus2=cycles["fus2"],
        ratio_fus2_seq=cycles["seq"] / max(1, cycles["fus2"]),
        pairs_before=agg.pairs_before, pairs_after=agg.pairs_after,
        forwarded_loads=fwd, dram_requests=dram, matched=matched)


def corpus_sources(corpus_dir: str | None = None):
    """Yield (name, source) pairs, sorted by display name."""
    items = []
    if corpus_dir is not None:
        for f in Path(corpus_dir).glob("*.dlf"):
            items.append((_DISPLAY.get(f.stem, f.stem), f.read_text()))
    else:
        root = resources.files("dlfusion") / "kernels"
        for f in root.iterdir():
            if f.name.endswith(".dlf"):
                stem = f.name[:-4]
                items.append((_DISPLAY.get(stem, stem), f.read_text()))
    return sorted(items)


def run_corpus(corpus_dir: str | None = None, seed: int = 1,
               config: SimConfig | None = None) -> list[BenchRow]:
    rows = []
    for name, src in corpus_sources(corpus_dir):
        rows.append(run_benchmark(name, parse(src), seed=seed,
                                  config=config))
    return rows


def to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    w.writeheader()
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def to_table(rows: list[BenchRow]) -> str:
    cols = CSV_COLUMNS + ["ok"]
    data = [[str(v) for v in list(r.as_csv().values()) +
             ["yes" if r.matched else "NO"]] for r in rows]
    widths = [max(len(c), *(len(d[i]) for d in data)) if data else len(c)
              for i, c in enumerate(cols)]
    out = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    for d in data:
        out.append("  ".join(v.ljust(w) for v, w in zip(d, widths)))
    return "\n".join(out)
