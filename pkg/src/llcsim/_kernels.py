"""Compiled inner loops.

Everything here works on plain numpy arrays so the Python layer can own the
state objects.  The tag store layout is shared by the main cache and by the
sampled profiling stores: ``tags/valid/dirty/owner/stamp/mru`` are
``(rows, assoc)`` arrays and ``stamp`` holds a global access tick (last use for
LRU, install time for FIFO).
"""

import numpy as np
from numba import njit

LRU = 0
FIFO = 1
PLRU = 2

# per-core interval counter columns
C_INSTR = 0
C_ACC = 1
C_LOADS = 2
C_STORES = 3
C_HITS = 4
C_MISSES = 5
C_LMISS = 6
C_WB = 7
C_FWB = 8
C_RCE = 9
N_COUNTERS = 10

# boundary modes
B_CYCLES = 0
B_INSTR = 1
B_TARGET = 2
B_NONE = 3

# stop reasons
STOP_END = 0
STOP_BOUNDARY = 1
STOP_WAC = 2
STOP_POWER_FAULT = -1


@njit(cache=True)
def _plru_touch(mru, row, way, ways):
    mru[row, way] = 1
    for k in range(ways):
        if mru[row, k] == 0:
            return
    for k in range(ways):
        if k != way:
            mru[row, k] = 0


@njit(cache=True)
def lookup_install(tags, valid, dirty, owner, stamp, mru, row, tag, ways,
                   policy, is_store, core, tick):
    """Access one set. Returns (hit, way, victim_valid, victim_dirty,
    victim_tag, victim_owner, stack_position)."""
    for w in range(ways):
        if valid[row, w] and tags[row, w] == tag:
            pos = 1
            s = stamp[row, w]
            for k in range(ways):
                if valid[row, k] and stamp[row, k] > s:
                    pos += 1
            if policy == LRU:
                stamp[row, w] = tick
            elif policy == PLRU:
                _plru_touch(mru, row, w, ways)
            if is_store:
                dirty[row, w] = 1
            return True, w, False, False, np.int64(-1), np.int64(-1), pos

    victim = -1
    for w in range(ways):
        if not valid[row, w]:
            victim = w
            break
    if victim < 0:
        if policy == PLRU:
            victim = 0
            for w in range(ways):
                if mru[row, w] == 0:
                    victim = w
                    break
        else:
            victim = 0
            best = stamp[row, 0]
            for w in range(1, ways):
                if stamp[row, w] < best:
                    best = stamp[row, w]
                    victim = w

    was_valid = valid[row, victim] != 0
    was_dirty = was_valid and dirty[row, victim] != 0
    old_tag = np.int64(tags[row, victim]) if was_valid else np.int64(-1)
    old_owner = np.int64(owner[row, victim]) if was_valid else np.int64(-1)

    tags[row, victim] = tag
    valid[row, victim] = 1
    dirty[row, victim] = 1 if is_store else 0
    owner[row, victim] = core
    stamp[row, victim] = tick
    if policy == PLRU:
        mru[row, victim] = 0
        _plru_touch(mru, row, victim, ways)
    return False, victim, was_valid, was_dirty, old_tag, old_owner, 0


@njit(cache=True)
def flush_rows(tags, valid, dirty, owner, mru, row_lo, row_hi, way_lo, way_hi,
               only_core, region, region_mask, core_dirty):
    """Invalidate matching lines. ``only_core``/``region`` of -1 disable the filter.

    The region filter assumes the stored tag is the page number.
    """
    clean = 0
    dirt = 0
    for r in range(row_lo, row_hi):
        for w in range(way_lo, way_hi):
            if not valid[r, w]:
                continue
            if only_core >= 0 and owner[r, w] != only_core:
                continue
            if region >= 0 and (tags[r, w] & region_mask) != region:
                continue
            if dirty[r, w]:
                dirt += 1
                core_dirty[owner[r, w]] += 1
            else:
                clean += 1
            valid[r, w] = 0
            dirty[r, w] = 0
            mru[r, w] = 0
    return clean, dirt


@njit(cache=True)
def shrink_lru_way(tags, valid, dirty, owner, stamp, mru, old_ways, core_dirty):
    """Turn off the least recently used line of every set and compact the
    survivors into ways ``[0, old_ways - 1)``."""
    clean = 0
    dirt = 0
    last = old_ways - 1
    for r in range(tags.shape[0]):
        victim = -1
        for w in range(old_ways):
            if not valid[r, w]:
                victim = w
                break
        if victim < 0:
            victim = 0
            for w in range(1, old_ways):
                if stamp[r, w] < stamp[r, victim]:
                    victim = w
        if valid[r, victim]:
            if dirty[r, victim]:
                dirt += 1
                core_dirty[owner[r, victim]] += 1
            else:
                clean += 1
            valid[r, victim] = 0
            dirty[r, victim] = 0
            mru[r, victim] = 0
        if victim != last:
            tags[r, victim] = tags[r, last]
            valid[r, victim] = valid[r, last]
            dirty[r, victim] = dirty[r, last]
            owner[r, victim] = owner[r, last]
            stamp[r, victim] = stamp[r, last]
            mru[r, victim] = mru[r, last]
            valid[r, last] = 0
            dirty[r, last] = 0
            mru[r, last] = 0
    return clean, dirt


@njit(cache=True)
def rce_event(block, is_store, dom, core, log_rs, spc_log, n_colors,
              pt_colors, pt_pow2, pt_base,
              r_tags, r_valid, r_dirty, r_owner, r_stamp, r_mru, assoc, policy,
              r_tick, r_acc, r_loads, r_miss, r_lmiss, hist, lhist):
    """Feed one access to every profiling point of ``dom``.

    Returns the number of tag-store probes (0 when the sampling filter rejects).
    """
    if (block & ((np.int64(1) << log_rs) - 1)) != 0:
        return 0
    page = block >> spc_log
    off = block & ((np.int64(1) << spc_log) - 1)
    npts = pt_colors.shape[0]
    for p in range(npts):
        colors = pt_colors[p]
        if pt_pow2[p]:
            color = page & (colors - 1)
        else:
            color = (page & (n_colors - 1)) % colors
        fullset = (color << spc_log) + off
        row = pt_base[dom, p] + (fullset >> log_rs)
        r_tick[0] += 1
        res = lookup_install(r_tags, r_valid, r_dirty, r_owner, r_stamp, r_mru,
                             row, page, assoc, policy, is_store, core, r_tick[0])
        r_acc[dom, p] += 1
        if not is_store:
            r_loads[dom, p] += 1
        if res[0]:
            hist[dom, p, res[6] - 1] += 1
            if not is_store:
                lhist[dom, p, res[6] - 1] += 1
        else:
            r_miss[dom, p] += 1
            if not is_store:
                r_lmiss[dom, p] += 1
    return npts


@njit(cache=True)
def rce_feed(cores, blocks, stores, dom_of_core, log_rs, spc_log, n_colors,
             pt_colors, pt_pow2, pt_base,
             r_tags, r_valid, r_dirty, r_owner, r_stamp, r_mru, assoc, policy,
             r_tick, r_acc, r_loads, r_miss, r_lmiss, hist, lhist):
    probes = 0
    mask = (np.int64(1) << log_rs) - 1
    for i in range(blocks.shape[0]):
        if blocks[i] & mask:
            continue
        c = cores[i]
        probes += rce_event(blocks[i], stores[i] != 0, dom_of_core[c], c, log_rs,
                            spc_log, n_colors, pt_colors, pt_pow2, pt_base,
                            r_tags, r_valid, r_dirty, r_owner, r_stamp, r_mru,
                            assoc, policy, r_tick, r_acc, r_loads, r_miss, r_lmiss,
                            hist, lhist)
    return probes


@njit(cache=True)
def simulate_rows(rows, tags_in, stores, cores, n_rows, assoc, policy):
    """Plain batch simulation of a cold cache. Returns per-access hit flags and
    the number of dirty evictions."""
    n = rows.shape[0]
    tags = np.zeros((n_rows, assoc), np.int64)
    valid = np.zeros((n_rows, assoc), np.uint8)
    dirty = np.zeros((n_rows, assoc), np.uint8)
    owner = np.zeros((n_rows, assoc), np.int32)
    stamp = np.zeros((n_rows, assoc), np.int64)
    mru = np.zeros((n_rows, assoc), np.uint8)
    hits = np.zeros(n, np.uint8)
    wb = 0
    for i in range(n):
        res = lookup_install(tags, valid, dirty, owner, stamp, mru, rows[i],
                             tags_in[i], assoc, policy, stores[i] != 0, cores[i],
                             i + 1)
        if res[0]:
            hits[i] = 1
        elif res[3]:
            wb += 1
    return hits, wb


@njit(cache=True)
def dct_sweep(valid, dirty, owner, mru, touch, toucher, lon, clock, decay, cnt, dct_cnt):
    """Switch off every on line idle for ``decay`` cycles of the clock of the
    core that last touched it."""
    turned = 0
    for r in range(valid.shape[0]):
        for w in range(valid.shape[1]):
            if lon[r, w] and clock[toucher[r, w]] - touch[r, w] >= decay:
                if valid[r, w]:
                    if dirty[r, w]:
                        cnt[owner[r, w], C_FWB] += 1
                    valid[r, w] = 0
                    dirty[r, w] = 0
                    mru[r, w] = 0
                lon[r, w] = 0
                turned += 1
    dct_cnt[0] -= turned
    dct_cnt[1] += turned
    return turned


@njit(cache=True)
def run_events(ev_core, ev_block, ev_store, ev_instr, start,
               cpi, stall_per_miss, tot_instr, tot_lmiss, ovh, clock, gclock, cnt,
               tags, valid, dirty, owner, stamp, mru, tick, policy, ways, color_on,
               decode_mode, cmap, spc_log, n_colors, active_sets_log,
               rce_on, rce_dom, log_rs, pt_colors, pt_pow2, pt_base,
               r_tags, r_valid, r_dirty, r_owner, r_stamp, r_mru, r_tick,
               r_acc, r_loads, r_miss, r_lmiss, hist, lhist,
               dct_on, touch, toucher, lon, decay, dct_f, dct_cnt,
               wac_on, hitpos, wac_hits, wac_k,
               bmode, bstate, target, poll):
    """Process events from ``start`` until the trace ends or a stop condition.

    ``dct_f`` = [next_tick, tick_period, on_integral].  ``bstate`` =
    [next_boundary_cycle, instruction_limit, poll_point].
    Returns (reason, next_event_index).
    """
    n = ev_core.shape[0]
    spc_mask = (np.int64(1) << spc_log) - 1
    rs_mask = (np.int64(1) << log_rs) - 1
    region_mask = n_colors - 1
    assoc = tags.shape[1]
    for i in range(start, n):
        c = ev_core[i]
        blk = ev_block[i]
        st = ev_store[i] != 0
        d = ev_instr[i]
        tot_instr[c] += d
        cnt[c, C_INSTR] += d

        page = blk >> spc_log
        if decode_mode == 0:
            color = cmap[c, page & region_mask]
            if not color_on[color]:
                return STOP_POWER_FAULT, i
            row = (color << spc_log) + (blk & spc_mask)
            tag = page
        else:
            row = blk & ((np.int64(1) << active_sets_log) - 1)
            tag = blk >> active_sets_log
        tick[0] += 1
        res = lookup_install(tags, valid, dirty, owner, stamp, mru, row, tag,
                             ways, policy, st, c, tick[0])
        cnt[c, C_ACC] += 1
        if st:
            cnt[c, C_STORES] += 1
        else:
            cnt[c, C_LOADS] += 1
        if res[0]:
            cnt[c, C_HITS] += 1
            if wac_on:
                hitpos[res[6] - 1] += 1
                wac_hits[0] += 1
        else:
            cnt[c, C_MISSES] += 1
            if not st:
                cnt[c, C_LMISS] += 1
                tot_lmiss[c] += 1
            if res[3]:
                cnt[res[5], C_WB] += 1

        now = tot_instr[c] * cpi[c] + tot_lmiss[c] * stall_per_miss[c] + ovh[c]
        clock[c] = now
        if now > gclock[0]:
            if dct_on:
                dct_f[2] += dct_cnt[0] * (now - gclock[0])
            gclock[0] = now
        g = gclock[0]

        if dct_on:
            way = res[1]
            if not lon[row, way]:
                lon[row, way] = 1
                dct_cnt[0] += 1
                dct_cnt[1] += 1
            touch[row, way] = now
            toucher[row, way] = c
            if g >= dct_f[0]:
                dct_sweep(valid, dirty, owner, mru, touch, toucher, lon, clock, decay,
                          cnt, dct_cnt)
                while dct_f[0] <= g:
                    dct_f[0] += dct_f[1]

        if rce_on and (blk & rs_mask) == 0:
            cnt[c, C_RCE] += rce_event(blk, st, rce_dom[c], c, log_rs, spc_log,
                                       n_colors, pt_colors, pt_pow2, pt_base,
                                       r_tags, r_valid, r_dirty, r_owner, r_stamp,
                                       r_mru, assoc, policy, r_tick, r_acc, r_loads,
                                       r_miss, r_lmiss, hist, lhist)

        if wac_on and wac_hits[0] >= wac_k:
            return STOP_WAC, i + 1
        if bmode == B_CYCLES:
            if g >= bstate[0]:
                return STOP_BOUNDARY, i + 1
        elif bmode == B_INSTR:
            total = 0
            for k in range(cnt.shape[0]):
                total += cnt[k, C_INSTR]
            if total >= bstate[1]:
                return STOP_BOUNDARY, i + 1
        elif bmode == B_TARGET:
            if bstate[2] < 0 and cnt[target, C_INSTR] >= bstate[1]:
                bstate[2] = (np.floor(clock[target] / poll) + 1.0) * poll
            if bstate[2] >= 0 and clock[target] >= bstate[2]:
                return STOP_BOUNDARY, i + 1
    return STOP_END, n
