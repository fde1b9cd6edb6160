"""Analytic timing model, memory-subsystem energy model and evaluation metrics.

All energies are in joules, powers in watts and times in seconds.
"""

import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigurationError, ReportMismatchError


@dataclass(frozen=True)
class EnergyParams:
    e_dyn_l2: float = 0.289e-9
    p_leak_l2: float = 1.39
    e_dyn_dram: float = 70e-9
    p_leak_dram: float = 0.18
    e_dyn_rce: float = 0.005e-9
    p_leak_rce: float = 0.006
    e_chi: float = 2e-12
    p_off: float = 0.03
    upsilon: float = 0.05
    g_f: float = 0.03
    d_f: float = 0.97
    frequency: float = 2.8e9

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value >= 0 or math.isinf(value):
                raise ConfigurationError(f"energy parameter {name}={value} must be finite and >= 0")
        for name in ("p_off", "upsilon", "g_f", "d_f"):
            if getattr(self, name) > 1:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if abs(self.g_f + self.d_f - 1.0) > 1e-12:
            raise ConfigurationError("g_f + d_f must equal 1")
        if self.frequency <= 0:
            raise ConfigurationError("frequency must be positive")


@dataclass(frozen=True)
class Preset:
    name: str
    size_bytes: int
    assoc: int
    block_bytes: int
    page_bytes: int
    cores: int
    params: EnergyParams
    tag_bits: int = 28


MB = 1 << 20
PRESETS = {
    "cacti32nm-4mb": Preset("cacti32nm-4mb", 4 * MB, 8, 64, 4096, 2, EnergyParams()),
    "cacti32nm-8mb": Preset("cacti32nm-8mb", 8 * MB, 8, 64, 4096, 4, EnergyParams(
        e_dyn_l2=0.438e-9, p_leak_l2=2.72, e_dyn_rce=0.016e-9, p_leak_rce=0.023)),
    "cacti45nm-2mb": Preset("cacti45nm-2mb", 2 * MB, 8, 64, 4096, 1, EnergyParams(
        e_dyn_l2=0.985e-9, p_leak_l2=1.568, e_dyn_rce=0.004e-9, p_leak_rce=0.007,
        frequency=1.5e9)),
}

# 45nm per-size L2 values (dynamic J/access, leakage W) for single-core studies
L2_45NM_TABLE = {
    8 * MB: (1.525e-9, 5.588),
    4 * MB: (1.148e-9, 2.848),
    2 * MB: (0.985e-9, 1.568),
    1 * MB: (0.912e-9, 0.966),
    MB // 2: (0.872e-9, 0.664),
    MB // 4: (0.848e-9, 0.500),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


@dataclass(frozen=True)
class CoreCounters:
    instructions: int = 0
    cycles: float = 0.0
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    load_misses: int = 0
    writebacks: int = 0
    rce_accesses: int = 0


@dataclass(frozen=True)
class IntervalStats:
    """Aggregate interval counters used by the energy model.

    ``writebacks`` counts both evictions and flushes; ``active_ways`` may be a
    time average and therefore fractional.
    """

    hits: int = 0
    misses: int = 0
    writebacks: int = 0
    rce_accesses: int = 0
    transitions: int = 0
    active_fraction: float = 1.0
    active_ways: float = 8
    assoc: int = 8
    time_seconds: float = 0.0
    instructions: int = 0
    cycles: float = 0.0
    load_misses: int = 0
    cores: tuple = field(default_factory=tuple)

    @property
    def dram_accesses(self):
        return self.misses + self.writebacks

    def __post_init__(self):
        if not 0.0 <= self.active_fraction <= 1.0:
            raise ValueError(f"active fraction {self.active_fraction} outside [0, 1]")
        if not 0 < self.active_ways <= self.assoc:
            raise ValueError(f"active ways {self.active_ways} outside 1..{self.assoc}")


@dataclass(frozen=True)
class EnergyBreakdown:
    le_l2: float
    de_l2: float
    e_dram: float
    e_algo: float
    e_tran: float
    total: float

    def __add__(self, other):
        le = self.le_l2 + other.le_l2
        de = self.de_l2 + other.de_l2
        dram = self.e_dram + other.e_dram
        algo = self.e_algo + other.e_algo
        return EnergyBreakdown(le, de, dram, algo, self.e_tran + other.e_tran,
                               le + de + dram + algo)

    def as_dict(self):
        return asdict(self)


ZERO_ENERGY = EnergyBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def energy(stats, params, mode="technique"):
    """Memory-subsystem energy of one interval.

    In ``baseline`` mode the cache is fully on, has no gating overhead and no
    algorithm cost.
    """
    if mode not in ("baseline", "technique"):
        raise ValueError(f"mode must be 'baseline' or 'technique', got {mode!r}")
    time = stats.time_seconds
    if mode == "baseline":
        upsilon, active, ways = 0.0, 1.0, stats.assoc
    else:
        upsilon, active, ways = params.upsilon, stats.active_fraction, stats.active_ways
    le = params.p_leak_l2 * (1 + upsilon) * (active + (1 - active) * params.p_off) * time
    de = (params.e_dyn_l2 * (2 * stats.misses + stats.hits)
          * (params.g_f + params.d_f * ways / stats.assoc))
    dram = params.p_leak_dram * time + params.e_dyn_dram * stats.dram_accesses
    if mode == "baseline":
        tran = algo = 0.0
    else:
        tran = params.e_chi * stats.transitions
        algo = tran + params.e_dyn_rce * stats.rce_accesses + params.p_leak_rce * time
    return EnergyBreakdown(le, de, dram, algo, tran, le + de + dram + algo)


def spm(stall_cycles, load_misses):
    """Stall cycles per load miss (0 when there were no load misses)."""
    if stall_cycles < 0 or load_misses < 0:
        raise ValueError("stall cycles and load misses must be non-negative")
    return stall_cycles / load_misses if load_misses else 0.0


def estimate_cycles(base_cycles, spm_value, load_misses_at_config):
    return base_cycles + spm_value * load_misses_at_config


def simulate_cycles(instructions, load_misses, base_cpi, miss_penalty, overlap):
    if base_cpi <= 0 or not 0 < overlap <= 1:
        raise ValueError("need base_cpi > 0 and overlap in (0, 1]")
    return instructions * base_cpi + load_misses * miss_penalty * overlap


def decay_interval(params, geometry):
    """Idle cycles after which keeping a block on costs more than refetching it."""
    return params.e_dyn_dram * params.frequency * geometry.blocks / params.p_leak_l2


@dataclass(frozen=True)
class RunTotals:
    """Whole-run aggregates needed for cross-run metrics."""

    energy: float
    cycles: float
    instructions: tuple
    core_cycles: tuple
    dram_accesses: int
    misses: int
    active_ratio: float


@dataclass(frozen=True)
class Metrics:
    pct_energy_saved: float
    weighted_speedup: float
    fair_speedup: float
    active_ratio: float
    apki_delta: float
    edp_saved: float
    mpki_delta: float

    def as_dict(self):
        return asdict(self)


def _per_kilo(count, instructions):
    return 1000.0 * count / instructions if instructions else 0.0


def metrics(baseline, technique):
    if tuple(baseline.instructions) != tuple(technique.instructions):
        raise ReportMismatchError(
            f"instruction windows differ: {baseline.instructions} vs {technique.instructions}")
    ratios = []
    for instr, cb, ct in zip(baseline.instructions, baseline.core_cycles, technique.core_cycles):
        ipc_base = instr / cb if cb else 0.0
        ipc_tech = instr / ct if ct else 0.0
        ratios.append(ipc_tech / ipc_base if ipc_base else 1.0)
    n = len(ratios)
    ws = sum(ratios) / n
    fs = n / sum(1.0 / r for r in ratios) if all(ratios) else 0.0
    saved = ((baseline.energy - technique.energy) * 100.0 / baseline.energy
             if baseline.energy else 0.0)
    edp_b = baseline.energy * baseline.cycles
    edp_t = technique.energy * technique.cycles
    edp_saved = (edp_b - edp_t) * 100.0 / edp_b if edp_b else 0.0
    instr = sum(baseline.instructions)
    return Metrics(
        pct_energy_saved=saved,
        weighted_speedup=ws,
        fair_speedup=fs,
        active_ratio=technique.active_ratio,
        apki_delta=_per_kilo(technique.dram_accesses, instr) - _per_kilo(baseline.dram_accesses, instr),
        edp_saved=edp_saved,
        mpki_delta=_per_kilo(technique.misses, instr) - _per_kilo(baseline.misses, instr),
    )


def gmean(values):
    values = list(values)
    if any(v <= 0 for v in values):
        raise ValueError("geometric mean needs positive values")
    return math.exp(sum(math.log(v) for v in values) / len(values))


def summarize(suite):
    """Suite average: geometric mean for the speedups, arithmetic mean otherwise."""
    suite = list(suite)
    if not suite:
        raise ValueError("empty suite")
    out = {}
    for name in Metrics.__dataclass_fields__:
        vals = [getattr(m, name) for m in suite]
        if name in ("weighted_speedup", "fair_speedup"):
            out[name] = gmean(vals)
        else:
            out[name] = sum(vals) / len(vals)
    return out
