"""Multicore color allocation that minimises estimated memory-subsystem energy."""

from dataclasses import dataclass
from itertools import product

from ..profiler import mcu
from .base import (NewAllocation, NoChange, allocation_energy, candidate_values)


@dataclass(frozen=True)
class MasterParams:
    t_max: int = 4
    t_pruned: int = 2
    thresholds: tuple = (50, 200, 300, 1000)
    min_fraction: float = 1 / 64
    vicinity: int = 10
    improve_min: float = 0.3

    def min_colors(self, n_colors):
        return max(1, int(n_colors * self.min_fraction))

    def per_core(self, cores):
        return self.t_max if cores <= 2 else self.t_pruned


def core_energy(ctx, domain, colors):
    """One core's share of the energy at ``colors``; terms common to all
    candidates (writebacks, the off-color floor) are left out."""
    p = ctx.params
    misses = domain.est_misses(colors)
    hits = domain.est_hits(colors)
    dyn = p.e_dyn_l2 * (2 * misses + hits) * (p.g_f + p.d_f)
    leak = (p.p_leak_l2 * (1 + p.upsilon) * (colors / ctx.n_colors) * (1 - p.p_off)
            * ctx.time_seconds)
    return dyn + leak + p.e_dyn_dram * misses


def master_candidates(domains, current, ctx, params):
    """Per-core candidate color values after pruning."""
    m = ctx.n_colors
    floor = params.min_colors(m)
    keep = params.per_core(len(current))
    out = []
    for dom, cur in zip(domains, current):
        gain = mcu(dom.curve, cur)
        lo = max(floor, cur - params.vicinity)
        hi = min(m, cur + params.vicinity)
        values = candidate_values(cur, gain, lo, hi, params.t_max, params.thresholds)
        if len(values) > keep:
            ranked = sorted(values, key=lambda v: (core_energy(ctx, dom, v), abs(v - cur), v))
            values = sorted(ranked[:keep])
        out.append(values)
    return out


def master_esa(domains, current, ctx, params=MasterParams()):
    """Pick per-core color counts; returns NewAllocation or NoChange."""
    current = tuple(int(c) for c in current)
    per_core = master_candidates(domains, current, ctx, params)
    evaluated = [(current, allocation_energy(ctx, domains, current))]
    for config in product(*per_core):
        if sum(config) > ctx.n_colors or config == current:
            continue
        evaluated.append((tuple(config), allocation_energy(ctx, domains, config)))
    best, best_energy = min(evaluated, key=lambda item: (item[1], item[0]))
    current_energy = evaluated[0][1]
    if best != current and best_energy <= current_energy * (1 - params.improve_min / 100):
        return NewAllocation(best, candidates=tuple(evaluated))
    return NoChange(candidates=tuple(evaluated))
