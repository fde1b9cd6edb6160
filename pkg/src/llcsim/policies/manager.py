"""QoS-constrained partitioning: one target program may lose at most a fixed
percentage of performance against an equal static split."""

from dataclasses import dataclass, field
from itertools import product

from ..errors import ConfigurationError
from ..profiler import mcu
from .base import (NewAllocation, NoChange, allocation_energy, candidate_values,
                   move_penalty_cycles)
from .master import core_energy


@dataclass
class ManagerState:
    n_colors: int
    cores: int
    target: int
    omega_pct: float = 5.0
    chi_pct: float = 0.4
    min_fraction: float = 1 / 32
    max_transfer: int = 12
    thresholds: tuple = (50, 200, 300, 1000)
    per_core: int = 4
    t: float = 0.0          # cycles
    elapsed: float = 0.0    # cycles
    history: list = field(default_factory=list)
    last_floor: int = 0

    def __post_init__(self):
        if self.target is None or not 0 <= self.target < self.cores:
            raise ConfigurationError("a target core must be designated")

    @property
    def min_colors(self):
        return max(1, int(self.n_colors * self.min_fraction))

    @property
    def reference_colors(self):
        return self.n_colors // self.cores

    @property
    def slowdown_pct(self):
        base = self.elapsed - self.t
        return self.t * 100.0 / base if base > 0 else 0.0


def target_floor(domain, state, current):
    """Fewest colors whose estimated extra time, including refetching the lines
    a move displaces, fits this interval's allowance.  With the allowance spent
    the target may not shrink and recovers towards its reference share."""
    ref = domain.est_cycles(state.reference_colors)
    allowance = max(0.0, state.omega_pct - state.chi_pct - state.slowdown_pct)
    if allowance <= 0:
        return max(current, state.reference_colors)
    budget = allowance / 100.0 * ref
    for c in range(state.min_colors, state.n_colors + 1):
        if domain.est_cycles(c) - ref + move_penalty_cycles(domain, current, c) <= budget:
            return c
    return state.n_colors


def manager_esa(domains, current, ctx, state):
    current = tuple(int(c) for c in current)
    m = state.n_colors
    tgt = domains[state.target]
    delta = tgt.measured_cycles - tgt.est_cycles(state.reference_colors)
    state.t += delta
    state.elapsed += tgt.measured_cycles
    state.history.append(delta)

    floor = min(target_floor(tgt, state, current[state.target]),
                current[state.target] + state.max_transfer)
    state.last_floor = floor
    per_core, lows = [], []
    for core, (dom, cur) in enumerate(zip(domains, current)):
        lo = max(state.min_colors, cur - state.max_transfer)
        if core == state.target:
            lo = max(lo, floor)
        lows.append(lo)
        hi = min(m, cur + state.max_transfer)
        values = candidate_values(cur, mcu(dom.curve, cur), lo, hi, state.per_core,
                                  state.thresholds)
        if core != state.target and len(domains) > 2 and len(values) > 2:
            values = sorted(sorted(values, key=lambda v: (core_energy(ctx, dom, v), v))[:2])
        per_core.append(values)

    configs = [c for c in product(*per_core) if sum(c) <= m]
    if not configs:
        # squeeze the other cores to their lowest reachable counts
        others = [lo for k, lo in enumerate(lows) if k != state.target]
        grow = min(max(per_core[state.target]), m - sum(others))
        config = list(others)
        config.insert(state.target, grow)
        configs = [tuple(config)]
    evaluated = [(cfg, allocation_energy(ctx, domains, cfg)) for cfg in configs]
    best, _ = min(evaluated, key=lambda item: (item[1], item[0]))
    if best == current:
        return NoChange(candidates=tuple(evaluated))
    return NewAllocation(best, candidates=tuple(evaluated))
