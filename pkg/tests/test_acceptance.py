"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import time

import numpy as np

from helpers import conservation_problems, loop, qos_suite, rand, scenario, spec, stream
from oracles import allocation_energy, estimated_cycles, lru_hits, random_observation

from llcsim import _kernels as K
from llcsim import harness
from llcsim.cache import derive_geometry
from llcsim.cli import formulas
from llcsim.energy import EnergyParams, IntervalStats, energy
from llcsim.policies import (CashierState, IntervalContext, ManagerState, MasterParams,
                             NewAllocation, NoChange, PaletteParams, WacState, WaySetting,
                             cashier_msm, cashier_psm, manager_esa, master_esa,
                             palette_esa, wac_tick)
from llcsim.profiler import (RceState, miss_estimate, profiling_points, rce_feed,
                             way_profile)
from llcsim.workload import generate, trace_bytes


# ----------------------------------------------------------------- 1. formulas

def test_formula_reproduction(verdict):
    started = time.perf_counter()
    r4 = dict(formulas("cacti32nm-4mb"))
    r8 = dict(formulas("cacti32nm-8mb"))
    r2 = dict(formulas("cacti45nm-2mb"))
    elapsed = time.perf_counter() - started
    checks = {
        "M(4MB)=128": r4["colors"] == 128,
        "M(2MB)=64": r2["colors"] == 64,
        "M(8MB)=256": r8["colors"] == 256,
        "F_RCE(N=2)~0.3%": abs(r4["rce_share_pct_MASTER7"] - 0.3) <= 0.05,
        "F_RCE(N=4)~0.6%": abs(r8["rce_share_pct_MASTER7"] - 0.6) <= 0.05,
        "tables(N=4,M=256)=8192b": r8["mapping_table_bits"] == 8192,
        "decay(4MB)=9.2M": abs(r4["decay_interval_cycles"] - 9.2e6) <= 0.1e6,
        "decay(2MB)=2.19M": abs(r2["decay_interval_cycles"] - 2.19e6) <= 0.05e6,
        "runtime<1s": elapsed < 1.0,
    }
    failed = [k for k, ok in checks.items() if not ok]
    verdict(1, not failed,
            f"F_RCE {r4['rce_share_pct_MASTER7']:.4f}%/{r8['rce_share_pct_MASTER7']:.4f}%, "
            f"decay {r4['decay_interval_cycles']}/{r2['decay_interval_cycles']} cycles, "
            f"{elapsed * 1000:.1f} ms" + (f"; failed: {failed}" if failed else ""))


# ----------------------------------------------------------------- 2. Mattson

def test_mattson_exactness(verdict):
    """Way-restricted hit counts equal a w-way LRU simulation of the sampled sets."""
    geo = derive_geometry(64 << 10, 8, 64, 512)   # 16 colors, 8 sets per color
    spc = geo.sets_per_color
    ratio = 2
    points = (4, 8, 16)
    rng = np.random.default_rng(2024)
    started = time.perf_counter()
    mismatches = []
    for trial in range(1000):
        n = int(rng.integers(1, 4097))
        pool = rng.integers(0, 1 << 20, int(rng.integers(4, 1500)))
        blocks = rng.choice(pool, n).astype(np.int64)
        stores = (rng.random(n) < 0.3).astype(np.uint8)
        rce = RceState(geo, points, sampling_ratio=ratio)
        rce_feed(rce, np.zeros(n, np.int32), blocks, stores)
        wc = rce.way_counters(0)
        sampled = [int(b) for b in blocks if b % ratio == 0]
        for row, colors in enumerate(points):
            sets = [b % (colors * spc) for b in sampled]
            for ways in range(1, geo.assoc + 1):
                expect = lru_hits(sets, sampled, ways)
                got = way_profile(wc, row, ways)
                if got != expect:
                    mismatches.append((trial, colors, ways, got, expect))
    elapsed = time.perf_counter() - started
    verdict(2, not mismatches and elapsed < 30,
            f"1000 traces x {len(points)} sizes x 8 ways, {len(mismatches)} mismatches, "
            f"{elapsed:.1f} s")


# ----------------------------------------------------------------- 3. RCE oracle

def _random_phase(rng, n):
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return loop(int(rng.integers(500, 120_000)), n, store=0.2)
    if kind == 1:
        return stream(n)
    return rand(int(rng.integers(1_000, 300_000)), n, store=0.1)


def _full_misses(page, off, stores, colors, n_colors, spc_log, assoc):
    rows = (((page % n_colors) % colors) << spc_log) + off
    hits, _ = K.simulate_rows(rows, page, stores, np.zeros(len(rows), np.int32),
                              colors << spc_log, assoc, K.LRU)
    return len(rows) - int(hits.sum())


def test_rce_oracle(verdict):
    """Sampled estimates vs full simulation at every profiling point.

    Even seeds profile each core separately at the partitioned points; odd seeds
    feed one shared domain at the shared-cache points (which include a
    non-power-of-two size).
    """
    geo = derive_geometry(4 << 20, 8, 64, 4096)
    m, spc = geo.colors, geo.sets_per_color
    spc_log = spc.bit_length() - 1
    started = time.perf_counter()
    worst, failures, checked = 0.0, [], 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        half = 250_000
        sp = spec([_random_phase(rng, half), _random_phase(rng, half)],
                  [_random_phase(rng, half), _random_phase(rng, half)])
        trace = generate(sp, seed)
        shared = seed % 2 == 1
        variant = "PALETTE6" if shared else "MASTER7"
        points = profiling_points(variant, m)
        rce = RceState(geo, points, 64, domains=1 if shared else 2,
                       domain_of_core=(0, 0) if shared else (0, 1))
        rce_feed(rce, trace.core, trace.block, trace.store)
        groups = [np.ones(len(trace), bool)] if shared else [trace.core == c for c in (0, 1)]
        for domain, sel in enumerate(groups):
            blk = trace.block[sel]
            page, off = blk >> spc_log, blk & (spc - 1)
            kilo_instr = trace.instr[sel].sum() / 1000
            for colors in points:
                truth = _full_misses(page, off, trace.store[sel], colors, m, spc_log,
                                     geo.assoc)
                est, _ = miss_estimate(rce, domain, colors)
                tol = max(0.10 * truth, 0.3 * kilo_instr)
                worst = max(worst, abs(est - truth) / tol)
                checked += 1
                if abs(est - truth) > tol:
                    failures.append((seed, domain, colors, truth, est))
    elapsed = time.perf_counter() - started
    verdict(3, not failures and elapsed < 300,
            f"{checked} point estimates on 50 x 1M-event traces, worst error "
            f"{worst:.2f} of tolerance, {len(failures)} outside, {elapsed:.0f} s")


# ----------------------------------------------------------------- 4. energy identities

def test_energy_identities(verdict):
    p = EnergyParams()
    rng = np.random.default_rng(7)
    additive = True
    for _ in range(2000):
        stats = IntervalStats(
            hits=int(rng.integers(0, 10**7)), misses=int(rng.integers(0, 10**6)),
            writebacks=int(rng.integers(0, 10**5)), rce_accesses=int(rng.integers(0, 10**5)),
            transitions=int(rng.integers(0, 10**5)), active_fraction=float(rng.random()),
            active_ways=float(rng.integers(1, 9)), time_seconds=float(rng.uniform(0, 2)))
        for mode in ("baseline", "technique"):
            e = energy(stats, p, mode)
            additive &= e.total == e.le_l2 + e.de_l2 + e.e_dram + e.e_algo
            additive &= e.e_tran <= e.e_algo
    leak_only = energy(IntervalStats(time_seconds=1.0), p, "baseline").total
    # 1.39 + 0.18 rounds to the double just below 1.57
    leak_ok = abs(leak_only - 1.57) <= math.ulp(1.57)
    seconds = 0.37
    gated = energy(IntervalStats(time_seconds=seconds, active_fraction=0.0), p, "technique")
    gated_ok = gated.le_l2 == p.p_leak_l2 * 1.05 * 0.03 * seconds
    verdict(4, additive and leak_ok and gated_ok,
            f"additive={additive}, leakage-only 4MB/1s={leak_only!r} J, "
            f"gated LE_L2 exact={gated_ok}")


# ----------------------------------------------------------------- 5. policy invariants

INTERVALS = 10_000
M = 128


def _ctx(rng):
    return IntervalContext(M, 8, float(rng.uniform(1e-4, 5e-3)), EnergyParams())


def _same(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-18)


def _master_problems(rng):
    params = MasterParams()
    pts = profiling_points("MASTER7", M)
    floor = M // 64
    problems, max_configs = [], 0
    for i in range(INTERVALS):
        if i % 2500 == 0:
            n = 2 if i < INTERVALS // 2 else 4
            current = tuple([M // n] * n)
        ctx = _ctx(rng)
        doms = [random_observation(rng, pts) for _ in range(n)]
        dec = master_esa(doms, current, ctx, params)
        max_configs = max(max_configs, dec.configs_evaluated)
        if dec.configs_evaluated > 17:
            problems.append(f"master evaluated {dec.configs_evaluated}")
        energies = {}
        for cfg, e in dec.candidates:
            if min(cfg) < floor or sum(cfg) > M:
                problems.append(f"master candidate {cfg} breaks a floor")
            energies[cfg] = allocation_energy(ctx.params, ctx, doms, cfg)
            if not _same(e, energies[cfg]):
                problems.append(f"master energy mismatch for {cfg}")
        best = min(energies, key=lambda c: (energies[c], c))
        expect_change = (best != current and energies[best]
                         <= energies[current] * (1 - params.improve_min / 100))
        if expect_change:
            if not (isinstance(dec, NewAllocation) and dec.colors == best):
                problems.append(f"master picked {dec} instead of {best}")
            current = best
        elif not isinstance(dec, NoChange):
            problems.append("master changed without enough gain")
        if min(current) < floor:
            problems.append(f"master allocation {current} under the floor")
    return problems, max_configs


def _palette_problems(rng):
    params = PaletteParams()
    pts = profiling_points("PALETTE6", M)
    floor = M // 16
    problems, current = [], M
    for _ in range(INTERVALS):
        ctx = _ctx(rng)
        dom = random_observation(rng, pts)
        dec = palette_esa(dom, current, ctx, params)
        ref = estimated_cycles(dom, current)
        energies = {}
        for (colors,), e in dec.candidates:
            if colors < floor or colors > M or (colors != current and colors % 2):
                problems.append(f"palette candidate {colors} invalid")
            seconds = ctx.time_seconds * estimated_cycles(dom, colors) / ref
            energies[colors] = allocation_energy(ctx.params, ctx, [dom], [colors], seconds)
            if not _same(e, energies[colors]):
                problems.append(f"palette energy mismatch at {colors}")
        if len(dec.candidates) > params.candidates:
            problems.append("palette evaluated too many candidates")
        best = min(energies, key=lambda c: (energies[c], c))
        got = dec.colors[0] if isinstance(dec, NewAllocation) else current
        if got != best:
            problems.append(f"palette picked {got} instead of {best}")
        current = got
    return problems


def _cashier_problems(rng, mode):
    pts = profiling_points("PALETTE6", M)
    floor = M // 16
    state = CashierState(M, slack_seconds=0.05)
    problems, current = [], M
    for _ in range(INTERVALS):
        ctx = _ctx(rng)
        dom = random_observation(rng, pts)
        dec = (cashier_psm if mode == "psm" else cashier_msm)(dom, current, ctx, state)
        full = estimated_cycles(dom, M)
        if mode == "psm":
            allowance = max(0.0, state.slack_pct - state.delta_pct - state.slowdown_pct)
        else:
            usable = state.slack_seconds * (1 - state.reserve_fraction)
            allowance = max(0.0, usable - state.t) / state.horizon
        energies = {}
        for (colors,), e in dec.candidates:
            extra = (estimated_cycles(dom, colors) - full
                     + abs(colors - current) / max(colors, current)
                     * dom.resident_lines * dom.spm)
            ok = (extra * 100 / full <= allowance if mode == "psm"
                  else extra / ctx.params.frequency <= allowance)
            if not ok or colors < floor:
                problems.append(f"cashier-{mode} admitted {colors}")
            seconds = (ctx.time_seconds * estimated_cycles(dom, colors)
                       / estimated_cycles(dom, current))
            energies[colors] = allocation_energy(ctx.params, ctx, [dom], [colors], seconds)
            if not _same(e, energies[colors]):
                problems.append(f"cashier-{mode} energy mismatch at {colors}")
        got = dec.colors[0] if isinstance(dec, NewAllocation) else current
        if energies:
            best = min(energies, key=lambda c: (energies[c], c))
            if got != best:
                problems.append(f"cashier-{mode} picked {got} instead of {best}")
        elif got < current:
            problems.append(f"cashier-{mode} shrank without admissible candidates")
        current = got
        if current < floor:
            problems.append(f"cashier-{mode} allocation {current} under the floor")
    return problems


def _manager_problems(rng):
    pts = profiling_points("MANAGER6", M)
    floor = M // 32
    problems, max_moved = [], 0
    for i in range(INTERVALS):
        if i % 2500 == 0:
            n = 2 if i < INTERVALS // 2 else 4
            state = ManagerState(M, n, target=0)
            current = tuple([M // n] * n)
        ctx = _ctx(rng)
        doms = [random_observation(rng, pts) for _ in range(n)]
        dec = manager_esa(doms, current, ctx, state)
        if n == 2 and dec.configs_evaluated > 16:
            problems.append(f"manager evaluated {dec.configs_evaluated}")
        energies = {}
        for cfg, e in dec.candidates:
            if min(cfg) < floor or sum(cfg) > M:
                problems.append(f"manager candidate {cfg} breaks a floor")
            energies[cfg] = allocation_energy(ctx.params, ctx, doms, cfg)
            if not _same(e, energies[cfg]):
                problems.append(f"manager energy mismatch for {cfg}")
        best = min(energies, key=lambda c: (energies[c], c))
        got = dec.colors if isinstance(dec, NewAllocation) else current
        if got != best:
            problems.append(f"manager picked {got} instead of {best}")
        moved = max(abs(a - b) for a, b in zip(got, current))
        max_moved = max(max_moved, moved)
        if moved > state.max_transfer:
            problems.append(f"manager moved {moved} colors for one core")
        current = got
    return problems, max_moved


def _wac_problems(rng):
    state = WacState(8, 8)
    problems = []
    for _ in range(INTERVALS):
        mru = int(rng.integers(0, 100_000))
        counters = np.concatenate(([mru], rng.integers(0, max(1, mru // 10), 7)))
        if rng.random() < 0.3:
            counters[state.active_ways - 1] = 0
        before = state.active_ways
        dec = wac_tick(counters, state)
        if mru == 0:
            expect = before
        else:
            ratio = counters[before - 1] / mru
            expect = before
            if ratio < state.t1 and before > state.min_ways:
                expect = before - 1
            elif ratio > state.t2 and before < state.assoc:
                expect = before + 1
        got = dec.ways if isinstance(dec, WaySetting) else before
        if got != expect:
            problems.append(f"wac went {before}->{got}, rule gives {expect}")
        state.active_ways = got
        if not 2 <= got <= 8:
            problems.append(f"wac at {got} ways")
    return problems


def test_policy_invariants(verdict):
    rng = np.random.default_rng(55)
    master, max_configs = _master_problems(rng)
    manager, max_moved = _manager_problems(rng)
    problems = {
        "master": master,
        "palette": _palette_problems(rng),
        "cashier-psm": _cashier_problems(rng, "psm"),
        "cashier-msm": _cashier_problems(rng, "msm"),
        "manager": manager,
        "wac": _wac_problems(rng),
    }
    bad = {k: v[:3] for k, v in problems.items() if v}
    verdict(5, not bad,
            f"{INTERVALS} intervals per policy; MASTER max {max_configs} configs, "
            f"MANAGER max {max_moved} colors moved per core"
            + (f"; violations: {bad}" if bad else ""))


# ----------------------------------------------------------------- 6. QoS

def _allocation_floor_ok(report, floor):
    return all(min(len(p) for p in rec["allocation"]["colors"]) >= floor
               for rec in report["intervals"])


def test_qos_behaviour(verdict):
    cfg_shared = scenario()
    cfg_split = scenario(sim={"baseline": "static-equal-partition"},
                         manager={"target": 0, "target_instructions": 1_000_000})
    cashier_ok, manager_ok, lines, problems = 0, 0, [], []
    for k, sp in enumerate(qos_suite()):
        trace = generate(sp, k)
        base = harness.run_baseline(cfg_shared, trace)
        tech = harness.run(cfg_shared, trace, "cashier-psm")
        b = sum(r["final_cycles"] for r in base["ledger"])
        t = sum(r["final_cycles"] for r in tech["ledger"])
        slow_c = (t - b) * 100 / b
        cashier_ok += slow_c <= 5.5

        base_m = harness.run_baseline(cfg_split, trace)
        tech_m = harness.run(cfg_split, trace, "manager")
        b = base_m["ledger"][0]["final_cycles"]
        slow_m = (tech_m["ledger"][0]["final_cycles"] - b) * 100 / b
        manager_ok += slow_m <= 5.5
        lines.append(f"{k}: {slow_c:+.2f}%/{slow_m:+.2f}%")
        for rep in (base, tech, base_m, tech_m):
            problems += conservation_problems(rep, trace)
        if not _allocation_floor_ok(tech, M // 16) or not _allocation_floor_ok(tech_m, M // 32):
            problems.append(f"workload {k}: allocation floor broken")
    verdict(6, cashier_ok >= 9 and manager_ok >= 9 and not problems,
            f"CASHIER-PSM {cashier_ok}/10, MANAGER {manager_ok}/10 within 5.5% "
            f"(cashier/manager slowdown: {', '.join(lines)})"
            + (f"; {problems[:3]}" if problems else ""))


# ----------------------------------------------------------------- 7. directional energy

def test_directional_energy(verdict):
    n = 400_000
    trace = generate(spec(loop(24_000, n), stream(n)), 1)
    cfg = scenario(interval={"cycles": 5_000_000})
    started = time.perf_counter()
    res = harness.sweep(cfg, trace, ["master", "dct", "wac"], workers=1)
    elapsed = time.perf_counter() - started
    saved = {p: res[p]["metrics"]["pct_energy_saved"] for p in ("master", "dct", "wac")}
    problems = [p for r in res.values() for p in conservation_problems(r, trace)]
    ok = (saved["master"] > 0 and saved["master"] > saved["dct"]
          and saved["master"] > saved["wac"] and elapsed < 120 and not problems)
    verdict(7, ok, "energy saved vs shared baseline: "
            + ", ".join(f"{k} {v:.2f}%" for k, v in saved.items()) + f", {elapsed:.1f} s")


# ----------------------------------------------------------------- 8. determinism

def test_determinism_and_conservation(verdict):
    sp = spec([loop(20_000, 60_000), rand(60_000, 60_000)], [stream(80_000), loop(6_000, 40_000)])
    first, second = generate(sp, 3), generate(sp, 3)
    same_trace = trace_bytes(first.header, first) == trace_bytes(second.header, second)
    cfg = scenario(interval={"cycles": 1_000_000},
                   manager={"target": 0, "target_instructions": 500_000},
                   cashier={"slack_seconds": 0.001})
    policies = ("none", "master", "palette", "encache", "cashier-msm", "cashier-psm",
                "manager", "dct", "wac")
    differing, problems = [], []
    for policy in policies:
        one = harness.run(cfg, first, policy)
        two = harness.run(cfg, second, policy)
        if (harness.report_json(one, include_wall_time=False)
                != harness.report_json(two, include_wall_time=False)
                or harness.report_csv(one) != harness.report_csv(two)):
            differing.append(policy)
        problems += [f"{policy}: {p}" for p in conservation_problems(one, first)]
    verdict(8, same_trace and not differing and not problems,
            f"trace identical={same_trace}; {len(policies)} policies, "
            f"non-reproducible={differing}, conservation issues={problems[:3]}")

