"""Way-adaptable cache: resize the active ways from LRU-position hit ratios."""

from dataclasses import dataclass

from .base import NoChange, WaySetting


@dataclass
class WacState:
    active_ways: int
    assoc: int
    t1: float = 0.005
    t2: float = 0.02
    k_hits: int = 100_000
    min_ways: int = 2


def wac_tick(hit_position_counters, state):
    """``hit_position_counters[i]`` counts hits at recency position ``i + 1``."""
    mru_hits = hit_position_counters[0]
    if mru_hits == 0:
        return NoChange()
    ratio = hit_position_counters[state.active_ways - 1] / mru_hits
    if ratio < state.t1 and state.active_ways > state.min_ways:
        return WaySetting(state.active_ways - 1)
    if ratio > state.t2 and state.active_ways < state.assoc:
        return WaySetting(state.active_ways + 1)
    return NoChange()
