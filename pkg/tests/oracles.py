"""Reference computations written independently of the package internals."""

from collections import OrderedDict

import numpy as np

from llcsim.policies import DomainObservation
from llcsim.profiler import MissCurve


def lru_hits(set_ids, keys, ways):
    """Hits of a plain ``ways``-way LRU cache; one ordered dict per set."""
    sets = {}
    hits = 0
    for s, k in zip(set_ids, keys):
        lines = sets.setdefault(s, OrderedDict())
        if k in lines:
            lines.move_to_end(k)
            hits += 1
            continue
        if len(lines) == ways:
            lines.popitem(last=False)
        lines[k] = True
    return hits


def technique_energy(p, hits, misses, writebacks, rce_accesses, active, seconds,
                     ways, assoc, transitions=0):
    leak = p.p_leak_l2 * (1 + p.upsilon) * (active + (1 - active) * p.p_off) * seconds
    dyn = p.e_dyn_l2 * (2 * misses + hits) * (p.g_f + p.d_f * ways / assoc)
    dram = p.p_leak_dram * seconds + p.e_dyn_dram * (misses + writebacks)
    algo = p.e_chi * transitions + p.e_dyn_rce * rce_accesses + p.p_leak_rce * seconds
    return leak + dyn + dram + algo


def curve_value(curve, field, colors):
    return float(np.interp(colors, curve.points, getattr(curve, field)))


def estimated_cycles(obs, colors):
    return obs.base_cycles + obs.spm * curve_value(obs.curve, "load_misses", colors)


def allocation_energy(p, ctx, domains, colors, seconds=None):
    seconds = ctx.time_seconds if seconds is None else seconds
    misses = sum(curve_value(d.curve, "misses", c) for d, c in zip(domains, colors))
    hits = sum(max(0.0, d.accesses - curve_value(d.curve, "misses", c))
               for d, c in zip(domains, colors))
    wb = sum(d.writebacks for d in domains)
    rce = sum(d.rce_accesses for d in domains)
    active = min(1.0, sum(colors) / ctx.n_colors)
    return technique_energy(p, hits, misses, wb, rce, active, seconds, ctx.assoc, ctx.assoc)


def random_observation(rng, points, scale=None):
    """A plausible interval: a non-increasing miss curve plus measured counters."""
    scale = scale or int(rng.integers(1_000, 2_000_000))
    accesses = scale
    top = rng.uniform(0.01, 1.0) * accesses
    drops = np.sort(rng.uniform(0.0, 1.0, len(points)))[::-1]
    shape = rng.choice(["smooth", "cliff", "flat"])
    if shape == "cliff":
        k = int(rng.integers(0, len(points)))
        misses = np.where(np.arange(len(points)) < k, top, top * rng.uniform(0, 0.2))
    elif shape == "flat":
        misses = np.full(len(points), top)
    else:
        misses = top * drops
    misses = np.floor(np.maximum.accumulate(misses[::-1])[::-1])
    load_share = rng.uniform(0.5, 1.0)
    load_misses = np.floor(misses * load_share)
    instr = accesses * rng.uniform(20, 200)
    cur_misses = int(misses[int(rng.integers(0, len(points)))])
    cur_loads = int(cur_misses * load_share)
    stall = cur_loads * rng.uniform(50, 300)
    curve = MissCurve(tuple(int(x) for x in points), tuple(map(float, misses)),
                      tuple(map(float, load_misses)))
    return DomainObservation(
        curve=curve, accesses=accesses, misses=cur_misses, load_misses=cur_loads,
        writebacks=int(cur_misses * rng.uniform(0, 0.3)), base_cycles=float(instr),
        stall_cycles=float(stall), rce_accesses=int(accesses / 64 * len(points)),
        overhead_cycles=float(rng.uniform(0, 2000)), loads=int(accesses * 0.8),
        resident_lines=int(rng.integers(0, 65536)), nominal_spm=200.0)
