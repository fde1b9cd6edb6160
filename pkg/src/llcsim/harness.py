"""Interval-driven simulation: trace -> cache/profiler -> policy -> reconfiguration.

Events run inside a compiled kernel until an interval boundary (or a WAC
check); the Python side then snapshots counters, asks the policy for a
decision, applies it and charges overhead cycles to every core.
"""

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import _kernels as K
from .cache import CacheState
from .coloring import (Allocation, ColorMap, apply_plan, choose_colors, even_split,
                       num_colors, plan_reallocation)
from .energy import (ZERO_ENERGY, CoreCounters, EnergyBreakdown, IntervalStats,
                     RunTotals, decay_interval, energy, metrics)
from .errors import ConfigurationError, InvariantViolation, ReportMismatchError
from .policies import (POLICY_NAMES, CashierState, DomainObservation, IntervalContext,
                       ManagerState, NewAllocation, NewConfig, NoChange, WacState,
                       WaySetting, cashier_msm, cashier_psm, describe, encache_esa,
                       manager_esa, master_esa, palette_esa, wac_tick)
from .policies.encache import STATE_FRACTION
from .profiler import RceState, profiling_points

REPORT_FORMAT = "llcsim-report"
REPORT_VERSION = 1

PARTITIONED = ("master", "manager")
COLOR_POLICIES = ("master", "manager", "palette", "cashier-msm", "cashier-psm")
RCE_VARIANT = {"master": "MASTER7", "manager": "MANAGER6", "palette": "PALETTE6",
               "cashier-msm": "PALETTE6", "cashier-psm": "PALETTE6",
               "encache": "ENCACHE4"}


def _check_compatible(cfg, trace, name):
    header = trace.header
    if header.page_bytes != cfg.page_bytes:
        raise ConfigurationError(
            f"trace page size {header.page_bytes} != configured {cfg.page_bytes}")
    if cfg.cores and header.cores != cfg.cores:
        raise ConfigurationError(f"trace has {header.cores} cores, config expects {cfg.cores}")
    m = num_colors(cfg.geometry())
    partitioned = name in PARTITIONED or (
        name == "none" and cfg.baseline == "static-equal-partition")
    if partitioned and m < header.cores:
        raise ConfigurationError(f"{m} colors cannot be split among {header.cores} cores")
    if name == "manager":
        if not 0 <= cfg.manager.target < header.cores:
            raise ConfigurationError(f"manager target core {cfg.manager.target} not in trace")
        if cfg.interval_mode != "target" and cfg.manager.target_instructions <= 0:
            raise ConfigurationError(
                "manager needs target-instruction intervals "
                "([interval] target_instructions or [manager] target_instructions)")
    if name == "encache" and cfg.replacement != "lru":
        raise ConfigurationError("encache profiling needs lru replacement")
    if cfg.interval_mode == "target" and not 0 <= cfg.manager.target < header.cores:
        raise ConfigurationError("interval target core not in trace")


def _dummy_rce(assoc):
    """Placeholder profiler arrays so the kernel signature stays fixed."""
    z2 = np.zeros((1, 1), np.int64)
    return dict(
        pt_colors=np.ones(1, np.int64), pt_pow2=np.ones(1, np.uint8), pt_base=z2.copy(),
        r_tags=np.zeros((1, assoc), np.int64), r_valid=np.zeros((1, assoc), np.uint8),
        r_dirty=np.zeros((1, assoc), np.uint8), r_owner=np.zeros((1, assoc), np.int32),
        r_stamp=np.zeros((1, assoc), np.int64), r_mru=np.zeros((1, assoc), np.uint8),
        r_tick=np.zeros(1, np.int64), r_acc=z2.copy(), r_loads=z2.copy(),
        r_miss=z2.copy(), r_lmiss=z2.copy(),
        hist=np.zeros((1, 1, assoc), np.int64), lhist=np.zeros((1, 1, assoc), np.int64))


class Simulation:
    """One scenario: a configuration, a trace and a policy."""

    def __init__(self, config, trace, policy=None, *, baseline=False):
        name = "none" if baseline else (policy or config.policy)
        if name not in POLICY_NAMES:
            raise ConfigurationError(f"unknown policy {name!r}")
        _check_compatible(config, trace, name)
        self.cfg, self.trace, self.name = config, trace, name
        self.mode = "baseline" if name == "none" else "technique"
        geo = config.geometry()
        self.geo = geo
        self.m = num_colors(geo)
        self.spc_log = int(math.log2(geo.sets_per_color))
        self.n = n = trace.header.cores
        a = geo.assoc
        self.state = CacheState(geo, config.replacement)

        self.cpi = np.array([t.base_cpi for t in trace.header.timing], np.float64)
        self.stall = np.array([t.stall_per_miss for t in trace.header.timing], np.float64)
        self.tot_instr = np.zeros(n, np.int64)
        self.tot_lmiss = np.zeros(n, np.int64)
        self.ovh = np.zeros(n, np.float64)
        self.clock = np.zeros(n, np.float64)
        self.gclock = np.zeros(1, np.float64)
        self.cnt = np.zeros((n, K.N_COUNTERS), np.int64)

        if name in PARTITIONED or (name == "none" and config.baseline == "static-equal-partition"):
            self.alloc = even_split(self.m, n)
            core_part = tuple(range(n))
        else:
            self.alloc = Allocation((range(self.m),), self.m)
            core_part = (0,) * n
        self.colormap = ColorMap.initial(self.alloc, core_part)
        self.cmap = self.colormap.tables
        self.decode_mode = 1 if name == "encache" else 0
        self.full_sets_log = int(math.log2(geo.sets))
        self.set_state = 0
        self.ways = a

        variant = RCE_VARIANT.get(name)
        if variant:
            domains = n if name in PARTITIONED else 1
            dom_of_core = range(n) if name in PARTITIONED else [0] * n
            self.rce = RceState(geo, profiling_points(variant, self.m),
                                config.sampling_ratio, domains, tuple(dom_of_core),
                                config.replacement)
            r = self.rce
            self.rce_args = dict(
                pt_colors=r.pt_colors, pt_pow2=r.pt_pow2, pt_base=r.pt_base,
                r_tags=r.tags, r_valid=r.valid, r_dirty=r.dirty, r_owner=r.owner,
                r_stamp=r.stamp, r_mru=r.mru, r_tick=r.tick, r_acc=r.accesses,
                r_loads=r.loads, r_miss=r.misses, r_lmiss=r.load_misses, hist=r.hist,
                lhist=r.load_hist)
            self.rce_dom = r.domain_of_core
        else:
            self.rce = None
            self.rce_args = _dummy_rce(a)
            self.rce_dom = np.zeros(n, np.int32)

        self.dct_on = name == "dct"
        if self.dct_on:
            decay = config.dct.decay_interval
            if decay is None:
                decay = decay_interval(config.energy, geo)
            self.decay = float(decay)
            period = self.decay * config.dct.tick_fraction
            if not period > 0:
                raise ConfigurationError("[dct] tick_fraction must be positive")
            self.touch = np.zeros((geo.sets, a), np.float64)
            self.toucher = np.zeros((geo.sets, a), np.int32)
            self.lon = np.ones((geo.sets, a), np.uint8)
            self.dct_f = np.array([period, period, 0.0], np.float64)
            self.dct_cnt = np.array([geo.sets * a, 0], np.int64)
        else:
            self.decay = 1.0
            self.touch = np.zeros((1, 1), np.float64)
            self.toucher = np.zeros((1, 1), np.int32)
            self.lon = np.zeros((1, 1), np.uint8)
            self.dct_f = np.zeros(3, np.float64)
            self.dct_cnt = np.zeros(2, np.int64)

        self.wac_on = name == "wac"
        w = config.wac
        self.wac_state = WacState(a, a, w.t1, w.t2, w.k_hits, w.min_ways) if self.wac_on else None
        self.hitpos = np.zeros(a, np.int64)
        self.wac_hits = np.zeros(1, np.int64)

        mode, length = config.interval_mode, config.interval_length
        if name == "manager" and config.manager.target_instructions > 0:
            mode, length = "target", config.manager.target_instructions
        self.bmode = {"cycles": K.B_CYCLES, "instructions": K.B_INSTR,
                      "target": K.B_TARGET}[mode]
        self.interval_length = length
        self.bstate = np.array([float(length) if mode == "cycles" else 0.0,
                                float(length), -1.0], np.float64)
        self.target = config.manager.target if mode == "target" else 0
        self.poll = float(config.poll_cycles)

        if name in ("cashier-msm", "cashier-psm"):
            self.policy_state = CashierState(self.m, **asdict(config.cashier))
        elif name == "manager":
            mc = config.manager
            self.policy_state = ManagerState(
                self.m, n, mc.target, mc.omega_pct, mc.chi_pct, mc.min_fraction,
                mc.max_transfer, mc.thresholds)
        else:
            self.policy_state = None
        self.records = []

    # ------------------------------------------------------------ kernel glue

    def _run_kernel(self, start):
        t, st, r = self.trace, self.state, self.rce_args
        reason, nxt = K.run_events(
            t.core, t.block, t.store, t.instr, start,
            self.cpi, self.stall, self.tot_instr, self.tot_lmiss, self.ovh, self.clock,
            self.gclock, self.cnt,
            st.tags, st.valid, st.dirty, st.owner, st.stamp, st.mru, st.tick,
            st.policy_code, self.ways, st.color_power, self.decode_mode, self.cmap,
            self.spc_log, self.m, self.full_sets_log - self.set_state,
            self.rce is not None, self.rce_dom, self.cfg.sampling_ratio.bit_length() - 1,
            r["pt_colors"], r["pt_pow2"], r["pt_base"], r["r_tags"], r["r_valid"],
            r["r_dirty"], r["r_owner"], r["r_stamp"], r["r_mru"], r["r_tick"],
            r["r_acc"], r["r_loads"], r["r_miss"], r["r_lmiss"], r["hist"], r["lhist"],
            self.dct_on, self.touch, self.toucher, self.lon, self.decay, self.dct_f,
            self.dct_cnt,
            self.wac_on, self.hitpos, self.wac_hits, self.wac_state.k_hits if self.wac_on else 0,
            self.bmode, self.bstate, self.target, self.poll)
        return int(reason), int(nxt)

    def _charge(self, cycles):
        """Add overhead cycles to every core's clock."""
        if cycles <= 0:
            return
        before = self.gclock[0]
        self.ovh += cycles
        self.clock[:] = self.tot_instr * self.cpi + self.tot_lmiss * self.stall + self.ovh
        after = max(before, float(self.clock.max()))
        if self.dct_on:
            self.dct_f[2] += self.dct_cnt[0] * (after - before)
        self.gclock[0] = after
        self.iv_overhead += cycles

    # ------------------------------------------------------------ interval bookkeeping

    def _begin_interval(self, first_event):
        self.iv_first = first_event
        self.iv_start = float(self.gclock[0])
        self.iv_clock0 = self.clock.copy()
        self.iv_overhead = 0
        self.iv_transitions = 0
        self.iv_ways_integral = 0.0
        self.iv_ways_mark = self.iv_start
        self.iv_on_start = int(self.dct_cnt[0])
        self.iv_wac_checks = 0
        self.iv_wac_changes = 0

    def _wac_check(self):
        dec = wac_tick(self.hitpos, self.wac_state)
        self.hitpos.fill(0)
        self.wac_hits[0] = 0
        self.iv_wac_checks += 1
        cost = self.cfg.overheads.algo_wac
        if isinstance(dec, WaySetting) and dec.ways != self.ways:
            g = float(self.gclock[0])
            self.iv_ways_integral += self.ways * (g - self.iv_ways_mark)
            self.iv_ways_mark = g
            if dec.ways < self.ways:
                for _ in range(self.ways - dec.ways):
                    core_dirty = np.zeros(self.n, np.int64)
                    st = self.state
                    K.shrink_lru_way(st.tags, st.valid, st.dirty, st.owner, st.stamp, st.mru,
                                     self.ways, core_dirty)
                    self.cnt[:, K.C_FWB] += core_dirty
                    self.ways -= 1
                    self.iv_transitions += self.geo.sets
            else:
                self.iv_transitions += self.geo.sets * (dec.ways - self.ways)
                self.ways = dec.ways
            self.wac_state.active_ways = self.ways
            self.iv_wac_changes += 1
            cost += self.cfg.overheads.reconfig
        self._charge(cost)

    def _observations(self, snap, core_cycles):
        groups = ([[c] for c in range(self.n)] if self.name in PARTITIONED
                  else [list(range(self.n))])
        st = self.state
        resident = np.bincount(st.owner[st.valid.astype(bool)], minlength=self.n)
        out = []
        for d, cores in enumerate(groups):
            base = sum(float(snap[c, K.C_INSTR]) * self.cpi[c] for c in cores)
            stall = sum(float(snap[c, K.C_LMISS]) * self.stall[c] for c in cores)
            measured = sum(float(core_cycles[c]) for c in cores)
            out.append(DomainObservation(
                curve=self.rce.curve(d),
                accesses=int(snap[cores, K.C_ACC].sum()),
                misses=int(snap[cores, K.C_MISSES].sum()),
                load_misses=int(snap[cores, K.C_LMISS].sum()),
                writebacks=int(snap[cores, K.C_WB].sum() + snap[cores, K.C_FWB].sum()),
                base_cycles=base, stall_cycles=stall,
                rce_accesses=int(snap[cores, K.C_RCE].sum()),
                overhead_cycles=max(0.0, measured - base - stall),
                loads=int(snap[cores, K.C_LOADS].sum()),
                way_counters=self.rce.way_counters(d) if self.name == "encache" else None,
                resident_lines=int(resident[cores].sum()),
                nominal_spm=float(np.mean(self.stall[cores]))))
        return out

    def _decide(self, snap, core_cycles, duration):
        cfg = self.cfg
        ctx = IntervalContext(self.m, self.geo.assoc, duration / cfg.energy.frequency,
                              cfg.energy)
        domains = self._observations(snap, core_cycles)
        counts = self.alloc.counts
        if self.name == "master":
            return master_esa(domains, counts, ctx, cfg.master)
        if self.name == "manager":
            return manager_esa(domains, counts, ctx, self.policy_state)
        if self.name == "palette":
            return palette_esa(domains[0], counts[0], ctx, cfg.palette)
        if self.name == "cashier-msm":
            return cashier_msm(domains[0], counts[0], ctx, self.policy_state)
        if self.name == "cashier-psm":
            return cashier_psm(domains[0], counts[0], ctx, self.policy_state)
        if self.name == "encache":
            return encache_esa(domains[0], (self.set_state, self.ways), ctx, cfg.encache)
        return NoChange()

    def _apply(self, decision):
        """Execute a decision; returns ``(changed, colors_moved)``."""
        if isinstance(decision, NewAllocation):
            new = choose_colors(self.alloc, decision.colors)
            moved = sum(len(b - a) for a, b in zip(self.alloc.parts, new.parts))
            plan = plan_reallocation(self.alloc, self.colormap, new)
            core_dirty = np.zeros(self.n, np.int64)
            _, _, transitions = apply_plan(self.state, plan, core_dirty)
            self.cnt[:, K.C_FWB] += core_dirty
            self.iv_transitions += transitions
            self.cmap[:] = plan.new_map.tables
            changed = new.parts != self.alloc.parts
            self.alloc = new
            return changed, moved
        if isinstance(decision, NewConfig):
            self._apply_encache(decision.set_state, decision.ways)
            return True, 0
        return False, 0

    def _apply_encache(self, new_state, new_ways):
        st, geo = self.state, self.geo
        old_sets = geo.sets >> self.set_state
        new_sets = geo.sets >> new_state
        core_dirty = np.zeros(self.n, np.int64)
        if new_state != self.set_state:
            K.flush_rows(st.tags, st.valid, st.dirty, st.owner, st.mru, 0, geo.sets, 0,
                         geo.assoc, -1, -1, self.m - 1, core_dirty)
        elif new_ways < self.ways:
            K.flush_rows(st.tags, st.valid, st.dirty, st.owner, st.mru, 0, old_sets,
                         new_ways, self.ways, -1, -1, self.m - 1, core_dirty)
        self.cnt[:, K.C_FWB] += core_dirty
        self.iv_transitions += (old_sets * self.ways + new_sets * new_ways
                                - 2 * min(old_sets, new_sets) * min(self.ways, new_ways))
        on_colors = max(1, new_sets // geo.sets_per_color)
        st.color_power[:] = 0
        st.color_power[:on_colors] = 1
        self.set_state, self.ways = new_state, new_ways

    def _active(self, duration, g_end):
        """(active fraction, active ways) of the interval being closed."""
        a = self.geo.assoc
        if self.dct_on:
            lines = self.geo.sets * a
            if duration > 0:
                return min(1.0, self.dct_f[2] / (lines * duration)), float(a)
            return self.dct_cnt[0] / lines, float(a)
        if self.wac_on:
            self.iv_ways_integral += self.ways * (g_end - self.iv_ways_mark)
            self.iv_ways_mark = g_end
            w = self.iv_ways_integral / duration if duration > 0 else float(self.ways)
            return w / a, w
        if self.name == "encache":
            return STATE_FRACTION[self.set_state] * self.ways / a, float(self.ways)
        return self.alloc.active / self.m, float(a)

    def _allocation_snapshot(self):
        if self.name == "encache":
            return {"set_state": self.set_state, "ways": self.ways}
        if self.wac_on:
            return {"ways": self.ways}
        return {"colors": self.alloc.snapshot()}

    def _close_interval(self, final):
        cfg = self.cfg
        g_end = float(self.gclock[0])
        duration = g_end - self.iv_start
        core_cycles = self.clock - self.iv_clock0
        active_fraction, active_ways = self._active(duration, g_end)
        allocation = self._allocation_snapshot()
        curves = ([self.rce.curve(d).to_dict() for d in range(self.rce.domains)]
                  if self.rce is not None else [])

        decision, changed, moved, algo = NoChange(), False, 0, 0
        if not final and self.name in RCE_VARIANT:
            decision = self._decide(self.cnt.copy(), core_cycles, duration)
            changed, moved = self._apply(decision)
            algo = cfg.overheads.algo_master
        elif not final and self.dct_on:
            algo = cfg.overheads.algo_dct
        if self.dct_on:
            # every transition is one on or one off switch
            net = int(self.dct_cnt[0]) - self.iv_on_start
            offs = (int(self.dct_cnt[1]) - net) // 2
            self.iv_transitions += int(self.dct_cnt[1])
            decision_info = {"kind": "BlockTurnoff", "configs_evaluated": 0, "lines": offs}
        elif self.wac_on:
            decision_info = {"kind": "WayChecks", "configs_evaluated": 0,
                             "checks": self.iv_wac_checks, "changes": self.iv_wac_changes,
                             "ways": self.ways}
        else:
            decision_info = describe(decision)
        decision_info["colors_moved"] = moved
        overhead = algo + (cfg.overheads.reconfig if changed else 0)
        if self.policy_state is not None:
            decision_info["slowdown_pct"] = self.policy_state.slowdown_pct

        snap = self.cnt
        cores = []
        for c in range(self.n):
            cores.append(CoreCounters(
                instructions=int(snap[c, K.C_INSTR]), cycles=float(core_cycles[c]),
                accesses=int(snap[c, K.C_ACC]), hits=int(snap[c, K.C_HITS]),
                misses=int(snap[c, K.C_MISSES]), load_misses=int(snap[c, K.C_LMISS]),
                writebacks=int(snap[c, K.C_WB] + snap[c, K.C_FWB]),
                rce_accesses=int(snap[c, K.C_RCE])))
        stats = IntervalStats(
            hits=int(snap[:, K.C_HITS].sum()), misses=int(snap[:, K.C_MISSES].sum()),
            writebacks=int(snap[:, K.C_WB].sum() + snap[:, K.C_FWB].sum()),
            rce_accesses=int(snap[:, K.C_RCE].sum()), transitions=int(self.iv_transitions),
            active_fraction=float(active_fraction), active_ways=float(active_ways),
            assoc=self.geo.assoc, time_seconds=duration / cfg.energy.frequency,
            instructions=int(snap[:, K.C_INSTR].sum()), cycles=duration,
            load_misses=int(snap[:, K.C_LMISS].sum()), cores=tuple(cores))
        e = energy(stats, cfg.energy, self.mode)

        core_rows = []
        for c, cc in enumerate(cores):
            row = asdict(cc)
            row["eviction_writebacks"] = int(snap[c, K.C_WB])
            row["flush_writebacks"] = int(snap[c, K.C_FWB])
            core_rows.append(row)
        self.records.append({
            "index": len(self.records),
            "start_cycle": self.iv_start,
            "end_cycle": g_end,
            "events": [self.iv_first, self.iv_next],
            "time_seconds": stats.time_seconds,
            "overhead_cycles": self.iv_overhead + overhead,
            "allocation": allocation,
            "stats": {
                "instructions": stats.instructions, "accesses": int(snap[:, K.C_ACC].sum()),
                "hits": stats.hits, "misses": stats.misses, "load_misses": stats.load_misses,
                "eviction_writebacks": int(snap[:, K.C_WB].sum()),
                "flush_writebacks": int(snap[:, K.C_FWB].sum()),
                "writebacks": stats.writebacks, "dram_accesses": stats.dram_accesses,
                "rce_accesses": stats.rce_accesses, "transitions": stats.transitions,
                "active_fraction": stats.active_fraction, "active_ways": stats.active_ways,
            },
            "cores": core_rows,
            "energy": e.as_dict(),
            "decision": decision_info,
            "curves": curves,
        })

        # reset for the next interval, then charge the boundary overhead to it
        self.cnt.fill(0)
        if self.rce is not None:
            self.rce.reset_counters()
        self.dct_f[2] = 0.0
        self.dct_cnt[1] = 0
        self._begin_interval(self.iv_next)
        self._charge(overhead)
        self.iv_overhead = 0
        if self.bmode == K.B_CYCLES:
            while self.bstate[0] <= self.gclock[0]:
                self.bstate[0] += self.interval_length
        self.bstate[2] = -1.0

    # ------------------------------------------------------------ main loop

    def run(self):
        started = time.perf_counter()
        self._begin_interval(0)
        i = 0
        while True:
            reason, i = self._run_kernel(i)
            self.iv_next = i
            if reason == K.STOP_POWER_FAULT:
                raise InvariantViolation(f"event {i} mapped to a powered-off color")
            if reason == K.STOP_WAC:
                self._wac_check()
                continue
            if reason == K.STOP_END:
                if i > self.iv_first:
                    self._close_interval(final=True)
                break
            self._close_interval(final=False)
        self.state.check_power_safety()
        return self._report(time.perf_counter() - started)

    def _report(self, wall):
        header = self.trace.header
        ledger = [{"instructions": int(self.tot_instr[c]),
                   "load_misses": int(self.tot_lmiss[c]),
                   "overhead_cycles": float(self.ovh[c]),
                   "final_cycles": float(self.clock[c])} for c in range(self.n)]
        report = {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "policy": self.name,
            "energy_mode": self.mode,
            "trace": {"fingerprint": header.fingerprint, "cores": header.cores,
                      "events": len(self.trace),
                      "timing": [asdict(t) for t in header.timing]},
            "config": json.loads(json.dumps(self.cfg.to_dict())),
            "intervals": self.records,
            "ledger": ledger,
            "wall_time_seconds": wall,
        }
        report["totals"] = compute_totals(report["intervals"], self.cfg.skip_intervals)
        return report


# ---------------------------------------------------------------- public API

def run(config, trace, policy=None, baseline_report=None):
    """Simulate ``trace`` under ``policy`` (default: the configured one).

    With ``baseline_report`` the report also carries comparison metrics.
    """
    report = Simulation(config, trace, policy).run()
    if baseline_report is not None:
        report["metrics"] = compare(baseline_report, report).as_dict()
    return report


def run_baseline(config, trace):
    return Simulation(config, trace, baseline=True).run()


def compute_totals(intervals, skip=0):
    """Aggregate interval records (after dropping the first ``skip``)."""
    used = intervals[skip:]
    n = len(used[0]["cores"]) if used else 0
    e = ZERO_ENERGY
    for rec in used:
        e = e + EnergyBreakdown(**rec["energy"])
    cycles = sum(r["end_cycle"] - r["start_cycle"] for r in used)
    weighted = sum(r["stats"]["active_fraction"] * (r["end_cycle"] - r["start_cycle"])
                   for r in used)
    if used and cycles > 0:
        active_ratio = weighted / cycles
    elif used:
        active_ratio = sum(r["stats"]["active_fraction"] for r in used) / len(used)
    else:
        active_ratio = 1.0

    def total(key):
        return sum(r["stats"][key] for r in used)

    return {
        "intervals": len(intervals),
        "skipped": min(skip, len(intervals)),
        "energy": e.as_dict(),
        "cycles": cycles,
        "time_seconds": sum(r["time_seconds"] for r in used),
        "instructions": [sum(r["cores"][c]["instructions"] for r in used) for c in range(n)],
        "core_cycles": [sum(r["cores"][c]["cycles"] for r in used) for c in range(n)],
        "hits": total("hits"),
        "misses": total("misses"),
        "load_misses": total("load_misses"),
        "writebacks": total("writebacks"),
        "flush_writebacks": total("flush_writebacks"),
        "dram_accesses": total("dram_accesses"),
        "rce_accesses": total("rce_accesses"),
        "transitions": total("transitions"),
        "active_ratio": active_ratio,
        "overhead_cycles": sum(r["overhead_cycles"] for r in used),
        "max_configs_evaluated": max((r["decision"]["configs_evaluated"] for r in used),
                                     default=0),
        "max_colors_moved": max((r["decision"]["colors_moved"] for r in used), default=0),
    }


def run_totals(report):
    t = report["totals"]
    return RunTotals(energy=t["energy"]["total"], cycles=t["cycles"],
                     instructions=tuple(t["instructions"]),
                     core_cycles=tuple(t["core_cycles"]),
                     dram_accesses=t["dram_accesses"], misses=t["misses"],
                     active_ratio=t["active_ratio"])


def compare(base_report, tech_report):
    fb = base_report["trace"]["fingerprint"]
    ft = tech_report["trace"]["fingerprint"]
    if fb != ft or base_report["trace"]["events"] != tech_report["trace"]["events"]:
        raise ReportMismatchError(f"reports come from different traces ({fb!r} vs {ft!r})")
    return metrics(run_totals(base_report), run_totals(tech_report))


def _sweep_job(args):
    config, trace, policy = args
    try:
        if policy == "baseline":
            return policy, run_baseline(config, trace)
        return policy, run(config, trace, policy)
    except Exception as exc:   # reported back to the coordinator
        return policy, exc


def iter_sweep(config, trace, policies, workers=None):
    """Yield ``(name, report_or_exception)`` for the baseline and each policy,
    in completion order."""
    jobs = ["baseline"] + sorted(set(policies))
    workers = thread_cap() if workers is None else workers
    args = [(config, trace, p) for p in jobs]
    if workers <= 1 or len(jobs) == 1:
        yield from map(_sweep_job, args)
        return
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        yield from pool.map(_sweep_job, args)


def sweep(config, trace, policies, workers=None):
    """Run every policy plus the baseline; returns ``{name: report}`` with the
    baseline under ``"baseline"``.  The first failure is re-raised."""
    results = {}
    for name, outcome in iter_sweep(config, trace, policies, workers):
        if isinstance(outcome, Exception):
            raise outcome
        results[name] = outcome
    attach_metrics(results)
    return results


def attach_metrics(results):
    base = results.get("baseline")
    if base is None:
        return
    for name, report in results.items():
        if name != "baseline":
            report["metrics"] = compare(base, report).as_dict()


def thread_cap():
    raw = os.environ.get("CACHESIM_THREADS", "")
    if raw.strip():
        try:
            value = int(raw)
        except ValueError:
            raise ConfigurationError(f"CACHESIM_THREADS must be an integer, got {raw!r}") from None
        return max(1, value)
    return os.cpu_count() or 1


# ---------------------------------------------------------------- serialization

def report_json(report, include_wall_time=True):
    data = report if include_wall_time else {k: v for k, v in report.items()
                                             if k != "wall_time_seconds"}
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def recompute_totals(report):
    return compute_totals(report["intervals"], report["config"]["skip_intervals"])


def _fmt(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


INTERVAL_COLUMNS = (
    "index", "start_cycle", "end_cycle", "time_seconds", "instructions", "accesses",
    "hits", "misses", "load_misses", "eviction_writebacks", "flush_writebacks",
    "dram_accesses", "rce_accesses", "transitions", "active_fraction", "active_ways",
    "overhead_cycles", "le_l2", "de_l2", "e_dram", "e_algo", "e_tran", "energy_total",
    "decision", "configs_evaluated", "colors_moved")


def _interval_row(rec):
    s, e, d = rec["stats"], rec["energy"], rec["decision"]
    values = {"index": rec["index"], "start_cycle": rec["start_cycle"],
              "end_cycle": rec["end_cycle"], "time_seconds": rec["time_seconds"],
              "overhead_cycles": rec["overhead_cycles"], "energy_total": e["total"],
              "decision": d["kind"], "configs_evaluated": d["configs_evaluated"],
              "colors_moved": d["colors_moved"]}
    for key in INTERVAL_COLUMNS:
        if key not in values:
            values[key] = s[key] if key in s else e[key]
    return [_fmt(values[k]) for k in INTERVAL_COLUMNS]


def summary_items(report):
    """Flat ``(name, value)`` pairs shared by the CSV summary block and tables."""
    t = report["totals"]
    items = [("policy", report["policy"]), ("energy_mode", report["energy_mode"]),
             ("intervals", t["intervals"]), ("skipped", t["skipped"])]
    items += [(f"energy_{k}", v) for k, v in sorted(t["energy"].items())]
    for key in ("cycles", "time_seconds", "hits", "misses", "load_misses", "writebacks",
                "flush_writebacks", "dram_accesses", "rce_accesses", "transitions",
                "active_ratio", "overhead_cycles", "max_configs_evaluated",
                "max_colors_moved"):
        items.append((key, t[key]))
    for c, (i, cyc) in enumerate(zip(t["instructions"], t["core_cycles"])):
        items += [(f"core{c}_instructions", i), (f"core{c}_cycles", cyc)]
    for k, v in sorted(report.get("metrics", {}).items()):
        items.append((f"metric_{k}", v))
    return items


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INTERVAL_COLUMNS)
    for rec in report["intervals"]:
        w.writerow(_interval_row(rec))
    w.writerow([])
    w.writerow(["summary", "value"])
    for key, value in summary_items(report):
        w.writerow([key, _fmt(value)])
    return buf.getvalue()


SUMMARY_COLUMNS = ("policy", "energy_total", "pct_energy_saved", "weighted_speedup",
                   "fair_speedup", "active_ratio", "apki_delta", "mpki_delta", "edp_saved",
                   "intervals", "max_configs_evaluated")


def sweep_csv(reports):
    """One row per policy (baseline excluded), sorted by policy name."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for name in sorted(p for p in reports if p != "baseline"):
        r = reports[name]
        m = r["metrics"]
        row = {"policy": name, "energy_total": r["totals"]["energy"]["total"],
               "intervals": r["totals"]["intervals"],
               "max_configs_evaluated": r["totals"]["max_configs_evaluated"], **m}
        w.writerow([_fmt(row[k]) for k in SUMMARY_COLUMNS])
    return buf.getvalue()
