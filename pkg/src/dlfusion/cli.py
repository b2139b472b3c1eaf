"""Command-line driver: analyze, decouple, run, check, bench, fuzz."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace

from .bench import run_corpus, to_csv, to_table
from .crs import analyze_program, cr_str
from .decouple import decouple, dump
from .hazards import analyze_hazards
from .ir import DslError, parse
from .oracle import initial_memory, interpret, memory_digest
from .progen import generate
from .sim import SimConfig, run


def _load_config(path: str | None) -> SimConfig:
    cfg = SimConfig()
    if not path:
        return cfg
    kinds = {f.name: f.type for f in fields(SimConfig)}
    kw = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in kinds:
                raise SystemExit(f"unknown config key: {key}")
            cur = getattr(cfg, key)
            if isinstance(cur, bool):
                kw[key] = val.lower() in ("1", "true", "yes", "on")
            elif isinstance(cur, int):
                kw[key] = int(val)
            else:
                kw[key] = val
    return replace(cfg, **kw)


def _sim_config(args) -> SimConfig:
    cfg = _load_config(getattr(args, "config", None))
    if getattr(args, "no_forwarding", False):
        cfg = replace(cfg, forwarding=False)
    mode = getattr(args, "mode", None)
    if mode and mode != "oracle":
        cfg = replace(cfg, mode=mode)
    return cfg


def _emit(args, payload: dict, text: str):
    if getattr(args, "json", None):
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    print(text)


def cmd_analyze(args) -> int:
    p = parse(open(args.program).read(), path=args.program)
    reports = analyze_program(p)
    lines, payload = [], []
    for op in p.mem_ops():
        r = reports[op.id]
        nm = sorted(r.non_monotonic_depths)
        lines.append(
            f"op {op.id} {'store' if op.is_store else 'load'} {op.array}: "
            f"cr={cr_str(r.cr)} affine={'yes' if r.affine else 'no'} "
            f"monotonic={'yes' if r.monotonic else 'no'} "
            f"non_monotonic_depths={nm}"
            + (" (annotated)" if r.annotated else ""))
        payload.append({"op": op.id, "kind": op.kind, "array": op.array,
                        "cr": cr_str(r.cr), "affine": r.affine,
                        "monotonic": r.monotonic,
                        "non_monotonic_depths": nm,
                        "annotated": r.annotated})
    out = {"ops": payload}
    if args.pairs:
        dus, agg = analyze_hazards(p)
        pair_lines, pair_payload = [], []
        for d in dus:
            for pr in d.pairs:
                pair_lines.append(f"pair {d.array}: dst=op{pr.a} "
                                  f"src=op{pr.b} kind={pr.kind}")
                pair_payload.append({"array": d.array, "dst": pr.a,
                                     "src": pr.b, "kind": pr.kind})
        lines.append(f"hazard pairs: {agg.pairs_before} before pruning, "
                     f"{agg.pairs_after} after")
        lines.extend(pair_lines)
        out["pairs"] = pair_payload
        out["pairs_before"] = agg.pairs_before
        out["pairs_after"] = agg.pairs_after
    _emit(args, out, "\n".join(lines))
    return 0


def cmd_decouple(args) -> int:
    p = parse(open(args.program).read(), path=args.program)
    g = decouple(p)
    text = dump(p, g)
    payload = {
        "pes": [{"id": pe.id, "ops": list(pe.op_ids)} for pe in g.pes],
        "channels": [{"fifo": c.fifo_id, "producer": c.producer,
                      "consumer": c.consumer, "var": c.var}
                     for c in g.channels],
        "dus": [{"id": d.id, "array": d.array, "protected": d.protected,
                 "ports": {str(k): v for k, v in d.ports.items()}}
                for d in g.dus],
    }
    _emit(args, payload, text if args.dump else
          f"{len(g.pes)} PEs, {len(g.dus)} DUs, "
          f"{len(g.channels)} channels")
    return 0


def cmd_run(args) -> int:
    p = parse(open(args.program).read(), path=args.program)
    mem0 = initial_memory(p, seed=args.seed)
    if args.mode == "oracle":
        mem, _ = interpret(p, mem0, seed=args.seed)
        digest = memory_digest(mem, order=[a.name for a in p.arrays])
        _emit(args, {"digest": f"{digest:016x}"}, f"{digest:016x}")
        return 0
    cfg = _sim_config(args)
    mem, stats, _ = run(p, cfg, mem0, seed=args.seed)
    payload = json.loads(stats.to_json())
    _emit(args, payload, json.dumps(payload, indent=2))
    return 1 if stats.deadlock else 0


def _check_program(p, cfg, seed):
    """Returns (ok, detail dict)."""
    mem0 = initial_memory(p, seed=seed)
    oracle_mem, _ = interpret(p, {k: list(v) for k, v in mem0.items()},
                              seed=seed)
    mem, stats, _ = run(p, cfg, {k: list(v) for k, v in mem0.items()},
                        seed=seed)
    if stats.deadlock:
        return False, {"reason": "deadlock", "cycles": stats.cycles}
    for a in p.arrays:
        got, want = mem[a.name], oracle_mem[a.name]
        for i, (g, w) in enumerate(zip(got, want)):
            if g != w:
                return False, {"reason": "mismatch", "array": a.name,
                               "index": i, "got": g, "want": w}
    return True, {"cycles": stats.cycles}


def cmd_check(args) -> int:
    p = parse(open(args.program).read(), path=args.program)
    dus, _ = analyze_hazards(p)
    for d in dus:
        for c in d.checks:
            if c.fallback:
                print(f"warning: sequentialized pair (op{c.a}, op{c.b}) "
                      f"on {d.array}", file=sys.stderr)
    ok, detail = _check_program(p, _sim_config(args), args.seed)
    if ok:
        _emit(args, {"ok": True, **detail}, f"OK ({detail['cycles']} cycles)")
        return 0
    if detail["reason"] == "deadlock":
        _emit(args, {"ok": False, **detail},
              f"DEADLOCK at cycle {detail['cycles']}")
    else:
        _emit(args, {"ok": False, **detail},
              f"MISMATCH at {detail['array']}[{detail['index']}]: "
              f"got {detail['got']}, want {detail['want']}")
    return 1


def cmd_bench(args) -> int:
    cfg = _sim_config(args)
    rows = run_corpus(args.corpus, seed=args.seed, config=cfg)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(to_csv(rows))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.as_csv() | {"matched": r.matched} for r in rows],
                      fh, indent=2)
            fh.write("\n")
    print(to_table(rows))
    return 0 if all(r.matched for r in rows) else 1


def cmd_fuzz(args) -> int:
    cfg = _sim_config(args)
    failures = []
    for i in range(args.count):
        seed = args.seed + i
        src, p = generate(seed)
        ok, detail = _check_program(p, cfg, seed)
        if not ok:
            failures.append({"seed": seed, **detail})
            print(f"FAIL seed={seed}: {detail}", file=sys.stderr)
    payload = {"count": args.count, "failures": failures}
    _emit(args, payload,
          f"{args.count} programs, {len(failures)} failures")
    return 0 if not failures else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="dlf",
        description="loop-nest analysis and cycle-approximate simulation "
                    "with dynamic loop fusion")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp, program=True):
        if program:
            sp.add_argument("program", help="path to a .dlf program")
        sp.add_argument("--json", help="write machine-readable output here")
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--config", help="key=value simulator config file")
        sp.add_argument("--mode",
                        choices=["fused", "sequential", "oracle"],
                        default="fused")
        sp.add_argument("--no-forwarding", action="store_true")

    sp = sub.add_parser("analyze", help="address analysis per memory op")
    common(sp)
    sp.add_argument("--pairs", action="store_true",
                    help="also list retained hazard pairs")
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("decouple", help="show the decoupled PE/DU graph")
    common(sp)
    sp.add_argument("--dump", action="store_true",
                    help="print the full per-PE program slices")
    sp.set_defaults(fn=cmd_decouple)

    sp = sub.add_parser("run", help="simulate a program")
    common(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("check",
                        help="simulate and compare against the interpreter")
    common(sp)
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("bench", help="run the benchmark corpus")
    common(sp, program=False)
    sp.add_argument("--corpus", help="directory of .dlf programs "
                                     "(default: bundled corpus)")
    sp.add_argument("--csv", help="write the CSV report here")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("fuzz",
                        help="random programs, simulator vs interpreter")
    common(sp, program=False)
    sp.add_argument("--count", type=int, default=100)
    sp.set_defaults(fn=cmd_fuzz)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except DslError as e:
        print(str(e), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
