"""Set-associative tag store with color-granular power gating."""

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, InvariantViolation

REPLACEMENT_POLICIES = {"lru": K.LRU, "fifo": K.FIFO, "plru": K.PLRU}
DEFAULT_ADDRESS_BITS = 45

LOAD = "load"
STORE = "store"


def is_power_of_two(value):
    return isinstance(value, (int, np.integer)) and value > 0 and (value & (value - 1)) == 0


def log2_exact(value):
    if not is_power_of_two(value):
        raise ConfigurationError(f"{value} is not a positive power of two")
    return int(value).bit_length() - 1


@dataclass(frozen=True)
class CacheGeometry:
    size_bytes: int
    assoc: int
    block_bytes: int
    sets: int
    tag_bits: int
    page_bytes: int
    address_bits: int = DEFAULT_ADDRESS_BITS

    @property
    def blocks(self):
        return self.sets * self.assoc

    @property
    def blocks_per_page(self):
        return self.page_bytes // self.block_bytes

    @property
    def colors(self):
        """Number of page colors, or 1 when the cache is smaller than one
        page per way."""
        span = self.page_bytes * self.assoc
        if self.size_bytes % span == 0:
            return self.size_bytes // span
        return 1

    @property
    def sets_per_color(self):
        return self.sets // self.colors


def derive_geometry(size_bytes, assoc, block_bytes, page_bytes,
                    address_bits=DEFAULT_ADDRESS_BITS):
    """Build a geometry, rejecting anything that is not a power of two."""
    for name, value in (("size_bytes", size_bytes), ("assoc", assoc),
                        ("block_bytes", block_bytes), ("page_bytes", page_bytes)):
        if not is_power_of_two(value):
            raise ConfigurationError(f"{name}={value} must be a positive power of two")
    if size_bytes % (assoc * block_bytes):
        raise ConfigurationError("assoc x block_bytes must divide size_bytes")
    if page_bytes < block_bytes:
        raise ConfigurationError("page_bytes must be at least block_bytes")
    sets = size_bytes // (assoc * block_bytes)
    tag_bits = address_bits - log2_exact(sets) - log2_exact(block_bytes)
    if tag_bits <= 0:
        raise ConfigurationError(f"address_bits={address_bits} too small for this cache")
    return CacheGeometry(int(size_bytes), int(assoc), int(block_bytes), int(sets),
                         int(tag_bits), int(page_bytes), int(address_bits))


@dataclass(frozen=True)
class AccessOutcome:
    hit: bool
    evicted_dirty: bool
    victim_tag: int | None
    is_load: bool


class CacheState:
    """Tag-only cache contents plus per-color power flags.

    The arrays are public because the simulation kernels mutate them in place.
    """

    def __init__(self, geometry, policy="lru"):
        if policy not in REPLACEMENT_POLICIES:
            raise ConfigurationError(f"unknown replacement policy {policy!r}")
        self.geometry = geometry
        self.policy = policy
        self.policy_code = REPLACEMENT_POLICIES[policy]
        shape = (geometry.sets, geometry.assoc)
        self.tags = np.zeros(shape, np.int64)
        self.valid = np.zeros(shape, np.uint8)
        self.dirty = np.zeros(shape, np.uint8)
        self.owner = np.zeros(shape, np.int32)
        self.stamp = np.zeros(shape, np.int64)
        self.mru = np.zeros(shape, np.uint8)
        self.color_power = np.ones(geometry.colors, np.uint8)
        self.tick = np.zeros(1, np.int64)

    @property
    def num_colors(self):
        return self.color_power.shape[0]

    def color_rows(self, color):
        spc = self.geometry.sets_per_color
        return color * spc, (color + 1) * spc

    def valid_in_color(self, color):
        lo, hi = self.color_rows(color)
        return int(self.valid[lo:hi].sum())

    def check_power_safety(self):
        for color in np.flatnonzero(self.color_power == 0):
            if self.valid_in_color(int(color)):
                raise InvariantViolation(f"valid line in powered-off color {color}")


def _kind_is_store(kind):
    if kind == STORE:
        return True
    if kind == LOAD:
        return False
    raise ValueError(f"kind must be {LOAD!r} or {STORE!r}, got {kind!r}")


def access(state, core_id, block_address, kind, target_set, tag):
    """Access ``target_set`` with ``tag``; ``block_address`` is informational."""
    is_store = _kind_is_store(kind)
    color = target_set // state.geometry.sets_per_color
    if not state.color_power[color]:
        raise InvariantViolation(
            f"block {block_address:#x} routed to powered-off color {color}")
    state.tick[0] += 1
    hit, _, _, was_dirty, old_tag, _, _ = K.lookup_install(
        state.tags, state.valid, state.dirty, state.owner, state.stamp, state.mru,
        int(target_set), int(tag), state.geometry.assoc, state.policy_code,
        is_store, int(core_id), state.tick[0])
    victim = None if hit or old_tag < 0 else int(old_tag)
    return AccessOutcome(bool(hit), bool(was_dirty), victim, not is_store)


def flush_color(state, color, only_core=None, region=None, core_dirty=None):
    """Invalidate lines of ``color``; returns ``(flushed_clean, flushed_dirty)``.

    ``only_core`` restricts the flush to one owner.  ``region`` restricts it to
    lines whose page lies in that memory region (tags are page numbers under
    colored indexing).  ``core_dirty``, if given, accumulates dirty counts per
    owner.
    """
    if not 0 <= color < state.num_colors:
        raise ValueError(f"color {color} out of range")
    lo, hi = state.color_rows(color)
    if core_dirty is None:
        core_dirty = np.zeros(int(state.owner.max()) + 1, np.int64)
    clean, dirt = K.flush_rows(
        state.tags, state.valid, state.dirty, state.owner, state.mru, lo, hi, 0,
        state.geometry.assoc, -1 if only_core is None else int(only_core),
        -1 if region is None else int(region), state.num_colors - 1, core_dirty)
    return int(clean), int(dirt)


def set_color_power(state, color, on):
    """Switch a color on or off; returns the number of block transitions."""
    if bool(state.color_power[color]) == bool(on):
        return 0
    if not on and state.valid_in_color(color):
        raise InvariantViolation(f"color {color} must be flushed before power-off")
    state.color_power[color] = 1 if on else 0
    return state.geometry.sets_per_color * state.geometry.assoc
