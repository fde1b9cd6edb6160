"""Page-color mapping tables, colored set indexing and reallocation planning.

A cache with ``M`` colors is split into ``M`` equal groups of consecutive sets.
Each core owns a table that maps every memory region (page number modulo
``M``) to one of the colors allocated to it.  Colors are grouped into
*partitions*: in a partitioned cache each core owns one partition, while a
shared cache uses a single partition whose table is used by every core.
"""

from dataclasses import dataclass, field

import numpy as np

from .cache import flush_color, is_power_of_two, log2_exact, set_color_power
from .errors import ConfigurationError


def num_colors(geometry):
    span = geometry.page_bytes * geometry.assoc
    if geometry.size_bytes % span:
        raise ConfigurationError(
            f"page_bytes x assoc = {span} does not divide cache size {geometry.size_bytes}")
    return geometry.size_bytes // span


def region_of(block_address, geometry, n_colors):
    if not is_power_of_two(n_colors):
        raise ConfigurationError("region computation needs a power-of-two color count")
    page = (block_address * geometry.block_bytes) // geometry.page_bytes
    return page % n_colors


def locate(block_address, core_id, colormap, geometry):
    """Return ``(color, set_within_color, tag)``.

    The tag is the full page number, so two pages that share a color never
    alias.  The global set is ``color * sets_per_color + set_within_color``.
    """
    per_page = geometry.blocks_per_page
    page = block_address // per_page
    color = int(colormap.tables[core_id, page % colormap.n_colors])
    return color, block_address % per_page, page


@dataclass(frozen=True)
class Allocation:
    """Color sets per partition; colors not in any partition are powered off."""

    parts: tuple
    n_colors: int

    def __post_init__(self):
        parts = tuple(frozenset(int(c) for c in p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        seen = set()
        for p in parts:
            if seen & p:
                raise ConfigurationError("partitions must be disjoint")
            if any(not 0 <= c < self.n_colors for c in p):
                raise ConfigurationError("color id out of range")
            seen |= p

    @property
    def off_colors(self):
        used = set().union(*self.parts) if self.parts else set()
        return frozenset(range(self.n_colors)) - used

    @property
    def counts(self):
        return tuple(len(p) for p in self.parts)

    @property
    def active(self):
        return self.n_colors - len(self.off_colors)

    def snapshot(self):
        return [sorted(p) for p in self.parts]


def even_split(n_colors, partitions):
    """Contiguous equal split; the first ``n_colors % partitions`` get one extra."""
    base, extra = divmod(n_colors, partitions)
    parts, start = [], 0
    for p in range(partitions):
        size = base + (1 if p < extra else 0)
        parts.append(range(start, start + size))
        start += size
    return Allocation(tuple(parts), n_colors)


@dataclass
class ColorMap:
    """Per-core region->color tables plus the partition each core uses."""

    tables: np.ndarray
    core_part: tuple

    @property
    def n_colors(self):
        return self.tables.shape[1]

    @classmethod
    def initial(cls, allocation, core_part):
        tables = np.zeros((len(core_part), allocation.n_colors), np.int32)
        for core, part in enumerate(core_part):
            colors = sorted(allocation.parts[part])
            if not colors:
                raise ConfigurationError(f"partition {part} has no colors")
            for region in range(allocation.n_colors):
                tables[core, region] = colors[region % len(colors)]
        return cls(tables, tuple(core_part))

    def copy(self):
        return ColorMap(self.tables.copy(), self.core_part)

    def cores_of(self, part):
        return tuple(c for c, p in enumerate(self.core_part) if p == part)


@dataclass(frozen=True)
class FlushAction:
    color: int
    core: int | None = None
    region: int | None = None


@dataclass
class ReconfigPlan:
    flushes: list = field(default_factory=list)
    power_off: list = field(default_factory=list)
    power_on: list = field(default_factory=list)
    new_map: ColorMap | None = None
    moved_regions: int = 0

    @property
    def empty(self):
        return not (self.flushes or self.power_off or self.power_on or self.moved_regions)


def _rebalance(row, new_colors, n_colors):
    """Spread ``n_colors`` regions evenly over ``new_colors`` with few moves.

    Returns the new row and the list of ``(region, old_color)`` pairs that moved.
    """
    new_colors = sorted(new_colors)
    k = len(new_colors)
    base, extra = divmod(n_colors, k)
    members = {c: [] for c in new_colors}
    orphans = []
    for region, color in enumerate(row):
        color = int(color)
        if color in members:
            members[color].append(region)
        else:
            orphans.append(region)
    by_size = sorted(new_colors, key=lambda c: (-len(members[c]), c))
    quota = {c: base + (1 if i < extra else 0) for i, c in enumerate(by_size)}
    freed = list(orphans)
    for c in new_colors:
        if len(members[c]) > quota[c]:
            freed.extend(members[c][quota[c]:])
            members[c] = members[c][:quota[c]]
    freed.sort()
    new_row = np.array(row, copy=True)
    moved = []
    it = iter(freed)
    for c in new_colors:
        for _ in range(quota[c] - len(members[c])):
            region = next(it)
            moved.append((region, int(row[region])))
            new_row[region] = c
    return new_row, moved


def plan_reallocation(old, colormap, new):
    """Turn an allocation change into flushes, remaps and power switches."""
    if new.n_colors != old.n_colors or len(new.parts) != len(old.parts):
        raise ConfigurationError("allocation shape changed")
    plan = ReconfigPlan(new_map=colormap.copy())
    for part, (before, after) in enumerate(zip(old.parts, new.parts)):
        cores = colormap.cores_of(part)
        owner = cores[0] if len(cores) == 1 else None
        for color in sorted(before - after):
            plan.flushes.append(FlushAction(color, owner))
        if before == after or not cores or not after:
            continue
        row = colormap.tables[cores[0]]
        new_row, moved = _rebalance(row, after, old.n_colors)
        for region, old_color in moved:
            if old_color in after:
                plan.flushes.append(FlushAction(old_color, owner, region))
        plan.moved_regions += len(moved)
        for core in cores:
            plan.new_map.tables[core] = new_row
    plan.power_off = sorted(new.off_colors - old.off_colors)
    plan.power_on = sorted(old.off_colors - new.off_colors)
    return plan


def apply_plan(state, plan, core_dirty):
    """Execute a plan on a cache; returns ``(clean, dirty, transitions)``."""
    clean = dirty = 0
    for action in plan.flushes:
        c, d = flush_color(state, action.color, action.core, action.region, core_dirty)
        clean += c
        dirty += d
    transitions = 0
    for color in plan.power_off:
        c, d = flush_color(state, color, None, None, core_dirty)
        clean += c
        dirty += d
        transitions += set_color_power(state, color, False)
    for color in plan.power_on:
        transitions += set_color_power(state, color, True)
    return clean, dirty, transitions


def choose_colors(old, counts):
    """Pick concrete color ids for the requested per-partition counts.

    Growing partitions take off colors lowest id first, then colors released
    by shrinking partitions (their highest ids first).
    """
    if len(counts) != len(old.parts):
        raise ConfigurationError("one count per partition required")
    if sum(counts) > old.n_colors or min(counts) < 1:
        raise ConfigurationError(f"infeasible color counts {counts}")
    parts = [set(p) for p in old.parts]
    released = []
    for p, want in enumerate(counts):
        surplus = len(parts[p]) - want
        if surplus > 0:
            drop = sorted(parts[p], reverse=True)[:surplus]
            parts[p] -= set(drop)
            released.extend(drop)
    pool = sorted(old.off_colors) + released
    for p, want in enumerate(counts):
        need = want - len(parts[p])
        if need > 0:
            parts[p] |= set(pool[:need])
            pool = pool[need:]
    return Allocation(tuple(parts), old.n_colors)


def mapping_table_bits(cores, n_colors):
    """Storage for all per-core tables: ``cores * M`` entries of ``log2(M)`` bits."""
    return cores * n_colors * log2_exact(n_colors)
