"""Decision types, per-interval observations and shared estimation helpers."""

from bisect import bisect_left
from dataclasses import dataclass, field

from ..energy import EnergyParams, IntervalStats, energy, estimate_cycles, spm
from ..profiler import interpolate


@dataclass(frozen=True)
class Decision:
    """Base class.  ``candidates`` lists ``(configuration, estimated_energy)``
    pairs in evaluation order, for auditing."""

    candidates: tuple = field(default=(), kw_only=True)

    @property
    def configs_evaluated(self):
        return len(self.candidates)


@dataclass(frozen=True)
class NoChange(Decision):
    pass


@dataclass(frozen=True)
class NewAllocation(Decision):
    colors: tuple


@dataclass(frozen=True)
class NewConfig(Decision):
    set_state: int
    ways: int


@dataclass(frozen=True)
class BlockTurnoff(Decision):
    lines: tuple


@dataclass(frozen=True)
class WaySetting(Decision):
    ways: int


def describe(decision):
    """JSON-friendly summary of a decision."""
    out = {"kind": type(decision).__name__, "configs_evaluated": decision.configs_evaluated}
    if isinstance(decision, NewAllocation):
        out["colors"] = list(decision.colors)
    elif isinstance(decision, NewConfig):
        out["set_state"] = decision.set_state
        out["ways"] = decision.ways
    elif isinstance(decision, WaySetting):
        out["ways"] = decision.ways
    elif isinstance(decision, BlockTurnoff):
        out["lines"] = len(decision.lines)
    return out


@dataclass(frozen=True)
class DomainObservation:
    """What one profiling domain saw during an interval.

    ``curve`` holds scaled profiler estimates; the other counts are measured on
    the real cache.  Cycle figures are summed over the domain's cores;
    ``overhead_cycles`` is algorithm/reconfiguration time charged to them.
    ``resident_lines`` is the domain's current cache footprint and
    ``nominal_spm`` the configured stall per miss, used when nothing missed.
    """

    curve: object
    accesses: int
    misses: int
    load_misses: int
    writebacks: int
    base_cycles: float
    stall_cycles: float
    rce_accesses: int = 0
    overhead_cycles: float = 0.0
    loads: int = 0
    way_counters: object = None
    resident_lines: int = 0
    nominal_spm: float = 0.0

    @property
    def spm(self):
        if self.load_misses == 0:
            return self.nominal_spm
        return spm(self.stall_cycles, self.load_misses)

    @property
    def measured_cycles(self):
        return self.base_cycles + self.stall_cycles + self.overhead_cycles

    def est_misses(self, colors):
        return interpolate(self.curve, colors, "misses")[0]

    def est_load_misses(self, colors):
        return interpolate(self.curve, colors, "load_misses")[0]

    def est_hits(self, colors):
        return max(0.0, self.accesses - self.est_misses(colors))

    def est_cycles(self, colors):
        return estimate_cycles(self.base_cycles, self.spm, self.est_load_misses(colors))


@dataclass(frozen=True)
class IntervalContext:
    n_colors: int
    assoc: int
    time_seconds: float
    params: EnergyParams


def config_energy(ctx, hits, misses, writebacks, rce_accesses, active_fraction,
                  time_seconds, ways=None):
    stats = IntervalStats(
        hits=hits, misses=misses, writebacks=writebacks, rce_accesses=rce_accesses,
        active_fraction=min(1.0, active_fraction),
        active_ways=ctx.assoc if ways is None else ways, assoc=ctx.assoc,
        time_seconds=time_seconds)
    return energy(stats, ctx.params, "technique").total


def allocation_energy(ctx, domains, colors, time_seconds=None):
    """Estimated energy when domain ``k`` holds ``colors[k]`` colors."""
    hits = sum(d.est_hits(c) for d, c in zip(domains, colors))
    misses = sum(d.est_misses(c) for d, c in zip(domains, colors))
    wb = sum(d.writebacks for d in domains)
    rce = sum(d.rce_accesses for d in domains)
    time = ctx.time_seconds if time_seconds is None else time_seconds
    return config_energy(ctx, hits, misses, wb, rce, sum(colors) / ctx.n_colors, time)


def move_penalty_cycles(domain, current, colors):
    """Stall cycles to refetch the lines displaced when a domain goes from
    ``current`` to ``colors`` colors (the moved share of its regions)."""
    if colors == current:
        return 0.0
    share = abs(colors - current) / max(colors, current)
    return share * domain.resident_lines * domain.spm


def scaled_time(ctx, domain, colors, current):
    """Interval wall time rescaled by the estimated cycle ratio."""
    ref = domain.est_cycles(current)
    if ref <= 0:
        return ctx.time_seconds
    return ctx.time_seconds * domain.est_cycles(colors) / ref


OFFSET_TEMPLATES = (
    (-6, -4, -1, 0),
    (-4, -1, 0, 1),
    (-1, 0, 4, 6),
    (0, 1, 4, 6),
    (0, 4, 6, 8),
)


def gain_band(gain, thresholds):
    """0 for gain <= first threshold ... len(thresholds) above the last."""
    return bisect_left(list(thresholds), gain)


def candidate_values(current, gain, lo, hi, count, thresholds, templates=OFFSET_TEMPLATES):
    """Offsets picked by gain band, clamped into ``[lo, hi]``; clamped duplicates
    are replaced by the nearest unused valid values."""
    hi = max(hi, lo)
    values = []
    for off in templates[gain_band(gain, thresholds)]:
        v = min(max(current + off, lo), hi)
        if v not in values:
            values.append(v)
    if len(values) < count:
        for v in sorted(range(lo, hi + 1), key=lambda x: (abs(x - current), x)):
            if len(values) >= count:
                break
            if v not in values:
                values.append(v)
    return sorted(values)
