"""Dynamic loop fusion: loop-nest analysis plus a cycle-approximate
simulator for decoupled access/execute pipelines that fuse sibling loops
at runtime while a disambiguation unit enforces memory ordering.

Main entry points:

- :func:`dlfusion.ir.parse` — DSL front end
- :func:`dlfusion.crs.analyze_program` — chain-of-recurrences address
  analysis and monotonicity classification
- :func:`dlfusion.decouple.decouple` — processing-element /
  disambiguation-unit graph construction
- :func:`dlfusion.hazards.analyze_hazards` — hazard pair enumeration,
  pruning, and check synthesis
- :func:`dlfusion.sim.run` — the simulator
- :func:`dlfusion.oracle.interpret` — sequential reference interpreter
"""

from .ir import DslError, parse
from .oracle import initial_memory, interpret, memory_digest
from .sim import SimConfig, SimStats, run

__version__ = "0.1.0"

__all__ = ["parse", "DslError", "interpret", "initial_memory",
           "memory_digest", "run", "SimConfig", "SimStats", "__version__"]
