"""Joint set-state and way-count selection gated by an estimated-slowdown bound."""

from dataclasses import dataclass

from ..energy import estimate_cycles
from ..profiler import SET_STATES, way_load_misses, way_profile
from .base import NewConfig, NoChange, config_energy

# fraction of sets kept on, indexed like SET_STATES
STATE_FRACTION = (1.0, 0.5, 0.25, 0.125)


@dataclass(frozen=True)
class EncacheParams:
    max_slowdown_pct: float = 3.0


def _state_row(wc, state):
    """Row of the way counters that emulates ``state`` (points are ascending)."""
    return len(wc.set_states) - 1 - state


def encache_estimates(domain, assoc):
    """``{(state, ways): (misses, load_misses, cycles)}`` for every configuration."""
    wc = domain.way_counters
    rs = wc.sampling_ratio
    out = {}
    for state in range(len(SET_STATES)):
        row = _state_row(wc, state)
        for ways in range(1, assoc + 1):
            misses = (int(wc.accesses[row]) - way_profile(wc, row, ways)) * rs
            loads_missed = way_load_misses(wc, row, ways) * rs
            cycles = estimate_cycles(domain.base_cycles, domain.spm, loads_missed)
            out[(state, ways)] = (misses, loads_missed, cycles)
    return out


def encache_esa(domain, current, ctx, params=EncacheParams()):
    """``current`` is ``(set_state, ways)``; returns NewConfig or NoChange."""
    est = encache_estimates(domain, ctx.assoc)
    ref = est[(0, ctx.assoc)][2]
    cur_cycles = est[tuple(current)][2]
    evaluated = []
    for (state, ways), (misses, _, cycles) in est.items():
        slowdown = (cycles - ref) * 100.0 / ref if ref > 0 else 0.0
        if slowdown > params.max_slowdown_pct:
            continue
        time = ctx.time_seconds * cycles / cur_cycles if cur_cycles > 0 else ctx.time_seconds
        hits = max(0.0, domain.accesses - misses)
        e = config_energy(ctx, hits, misses, domain.writebacks, domain.rce_accesses,
                          STATE_FRACTION[state] * ways / ctx.assoc, time, ways)
        evaluated.append(((state, ways), e))
    best, _ = min(evaluated, key=lambda item: (item[1], item[0]))
    if best == tuple(current):
        return NoChange(candidates=tuple(evaluated))
    return NewConfig(best[0], best[1], candidates=tuple(evaluated))
