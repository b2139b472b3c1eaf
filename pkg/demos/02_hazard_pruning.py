"""Hazard detection and static pruning on a butterfly kernel.

Decoupling splits the program into processing elements (compute) and data
units (one per memory).  Within each data unit, every (request, store)
pair in program order is a potential hazard.  Most of them can be
discharged at compile time — same-iteration pairs whose addresses provably
differ, pairs already covered by a transitive chain, pairs whose value
dependence already serializes them — leaving only a handful of runtime
checks for the hardware to perform.
"""

from dlfusion.decouple import decouple
from dlfusion.hazards import analyze_hazards
from dlfusion.ir import parse

BUTTERFLY = """param L max 2;
param H max 2;
mem A[4];

loop s = 0..L {
  loop j = 0..H {
    let u = load A[j];
    let v = load A[j + H];
    store A[j] = u + v;
    store A[j + H] = u - v + s;
  }
  loop k = 0..H {
    let x = load A[k];
    let y = load A[k + H];
    store A[k] = x + y + 1;
    store A[k + H] = x - y + k;
  }
}
"""

p = parse(BUTTERFLY)
d = decouple(p)
print(f"processing elements: {len(d.pes)}   data units: {len(d.dus)}")

dus, agg = analyze_hazards(p)
du = dus[0]
s = du.stats
print(f"hazard pairs before pruning : {s.pairs_before}")
print(f"  pruned (transitive chain) : {s.pruned_transitive}")
print(f"  pruned (write uses read)  : {s.pruned_war_write_depends_on_read}")
print(f"hazard pairs after pruning  : {s.pairs_after}")
print()

print("surviving runtime checks:")
for c in du.checks:
    route = "program-order only" if not c.address_check else "address route"
    print(f"  op {c.a} vs store op {c.b} [{c.kind}]: depth k={c.k} "
          f"cmp={'<=' if c.le else '<'} delta={c.delta}  ({route})")
