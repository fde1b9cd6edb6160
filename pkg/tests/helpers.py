"""Workload and scenario builders shared by the test modules."""

from llcsim.config import scenario_from_mapping
from llcsim.workload import CoreSpec, CoreTiming, Phase, SyntheticSpec


def loop(wss, n, store=0.2, epki=20.0):
    return Phase("loop", wss, n, store, epki)


def stream(n, stride=1, store=0.0, epki=20.0):
    return Phase("stream", stride, n, store, epki)


def rand(footprint, n, store=0.1, epki=20.0):
    return Phase("random", footprint, n, store, epki)


def spec(*cores, overlap=1.0):
    """Each argument is one core's phase list (or a single phase)."""
    out = []
    for phases in cores:
        if isinstance(phases, Phase):
            phases = (phases,)
        out.append(CoreSpec(tuple(phases), CoreTiming(1.0, 200.0, overlap)))
    return SyntheticSpec(tuple(out))


def scenario(**sections):
    """Desk-scale defaults (4MB, 8-way, 64B blocks, 4KB pages) plus overrides,
    given as ``section={key: value}``."""
    base = {"cache": {"size": "4MB", "assoc": 8}, "interval": {"cycles": 2_000_000}}
    for name, values in sections.items():
        base.setdefault(name, {}).update(values)
    return scenario_from_mapping(base)


def qos_suite(n=500_000):
    """Ten two-core mixes of reuse-friendly and streaming behaviour."""
    return [
        spec(loop(24000, n), stream(n)),
        spec(loop(40000, n), loop(10000, n)),
        spec(loop(16000, n), rand(200_000, n)),
        spec(loop(60000, n), stream(n)),
        spec(rand(30000, n), loop(20000, n)),
        spec(loop(8000, n), loop(8000, n)),
        spec(stream(n), stream(n, stride=2)),
        spec([loop(30000, n // 2), loop(5000, n // 2)], rand(100_000, n)),
        spec(rand(50000, n), rand(50000, n)),
        spec(loop(12000, n), loop(48000, n)),
    ]


def conservation_problems(report, trace):
    """Exact bookkeeping identities of a report; returns a list of violations."""
    problems = []
    timing = trace.header.timing
    for c, row in enumerate(report["ledger"]):
        t = timing[c]
        expect = (row["instructions"] * t.base_cpi + row["load_misses"] * t.stall_per_miss
                  + row["overhead_cycles"])
        if row["final_cycles"] != expect:
            problems.append(f"core {c} ledger {row['final_cycles']!r} != {expect!r}")
        instr = sum(rec["cores"][c]["instructions"] for rec in report["intervals"])
        lmiss = sum(rec["cores"][c]["load_misses"] for rec in report["intervals"])
        if (instr, lmiss) != (row["instructions"], row["load_misses"]):
            problems.append(f"core {c} interval sums differ from the ledger")
    accesses = 0
    for rec in report["intervals"]:
        s = rec["stats"]
        if s["dram_accesses"] != s["misses"] + s["eviction_writebacks"] + s["flush_writebacks"]:
            problems.append(f"interval {rec['index']} DRAM accesses not conserved")
        if s["hits"] + s["misses"] != s["accesses"]:
            problems.append(f"interval {rec['index']} hits + misses != accesses")
        per_core = rec["cores"]
        if sum(r["misses"] for r in per_core) != s["misses"]:
            problems.append(f"interval {rec['index']} per-core misses do not add up")
        wb = sum(r["eviction_writebacks"] + r["flush_writebacks"] for r in per_core)
        if wb != s["eviction_writebacks"] + s["flush_writebacks"]:
            problems.append(f"interval {rec['index']} per-core writebacks do not add up")
        if any(r["writebacks"] != r["eviction_writebacks"] + r["flush_writebacks"]
               for r in per_core):
            problems.append(f"interval {rec['index']} core writeback split inconsistent")
        accesses += s["accesses"]
    if accesses != len(trace):
        problems.append(f"{accesses} accesses recorded for {len(trace)} events")
    return problems
