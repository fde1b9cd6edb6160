"""Set-sampled shadow tag stores that emulate several cache sizes at once.

Each *profiling point* is an emulated cache of ``C`` colors.  A sampling
filter admits block addresses whose low ``log2(R_s)`` bits are zero, so every
point only keeps ``ceil(C * sets_per_color / R_s)`` sets.  Counters are
sampled values; :func:`miss_estimate` and :class:`MissCurve` scale them back by
``R_s``.  Profiling is organised in *domains*: one per core when cores have
private partitions, or a single domain fed by all cores for a shared cache.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .cache import REPLACEMENT_POLICIES, _kind_is_store, is_power_of_two, log2_exact
from .coloring import num_colors
from .errors import ConfigurationError

VARIANTS = ("MASTER7", "PALETTE6", "MANAGER6", "ESTO6", "ENCACHE4")
SET_STATES = ("Full", "Half", "Quarter", "Eighth")


def _fractions(variant):
    if variant == "MASTER7":
        return [Fraction(2 ** (j - 1), 64) for j in range(1, 8)]
    if variant == "PALETTE6":
        return [Fraction(k, 16) for k in (1, 2, 4, 8, 12, 16)]
    if variant == "MANAGER6":
        return [Fraction(2 ** (j - 1), 32) for j in range(1, 7)]
    if variant == "ESTO6":
        return [Fraction(1, 16), Fraction(1, 8), Fraction(1, 4), Fraction(1, 2),
                Fraction(1), Fraction(2)]
    if variant == "ENCACHE4":
        return [Fraction(1, 8), Fraction(1, 4), Fraction(1, 2), Fraction(1)]
    raise ConfigurationError(f"unknown profiling variant {variant!r}; choose from {VARIANTS}")


def profiling_points(variant, n_colors):
    """Emulated sizes in colors, ascending."""
    points = []
    for frac in _fractions(variant):
        colors = frac * n_colors
        if colors.denominator != 1 or colors < 1:
            raise ConfigurationError(
                f"{variant} needs more colors than {n_colors} to place its points")
        points.append(int(colors))
    return tuple(points)


def sample_filter(block_address, sampling_ratio):
    return (block_address & (sampling_ratio - 1)) == 0


class RceState:
    """Sampled tag stores for every (domain, point) pair plus counters."""

    def __init__(self, geometry, points, sampling_ratio=64, domains=1,
                 domain_of_core=(0,), policy="lru"):
        if not is_power_of_two(sampling_ratio):
            raise ConfigurationError("sampling ratio must be a power of two")
        if policy not in REPLACEMENT_POLICIES:
            raise ConfigurationError(f"unknown replacement policy {policy!r}")
        points = tuple(int(p) for p in points)
        if any(b <= a for a, b in zip(points, points[1:])) or points[0] < 1:
            raise ConfigurationError("profiling points must be strictly increasing and >= 1")
        self.geometry = geometry
        self.n_colors = num_colors(geometry)
        self.points = points
        self.sampling_ratio = int(sampling_ratio)
        self.log_rs = log2_exact(sampling_ratio)
        self.spc_log = log2_exact(geometry.sets_per_color)
        self.policy = policy
        self.policy_code = REPLACEMENT_POLICIES[policy]
        self.domains = int(domains)
        self.domain_of_core = np.asarray(domain_of_core, np.int32)
        if self.domain_of_core.max(initial=0) >= self.domains:
            raise ConfigurationError("core mapped to a missing profiling domain")
        spc = geometry.sets_per_color
        self.rows_per_point = tuple(max(1, math.ceil(c * spc / self.sampling_ratio))
                                    for c in points)
        self.pt_colors = np.array(points, np.int64)
        self.pt_pow2 = np.array([is_power_of_two(c) for c in points], np.uint8)
        per_domain = sum(self.rows_per_point)
        offsets = np.concatenate(([0], np.cumsum(self.rows_per_point)[:-1]))
        self.pt_base = (np.arange(self.domains)[:, None] * per_domain
                        + offsets[None, :]).astype(np.int64)
        rows = per_domain * self.domains
        shape = (rows, geometry.assoc)
        self.tags = np.zeros(shape, np.int64)
        self.valid = np.zeros(shape, np.uint8)
        self.dirty = np.zeros(shape, np.uint8)
        self.owner = np.zeros(shape, np.int32)
        self.stamp = np.zeros(shape, np.int64)
        self.mru = np.zeros(shape, np.uint8)
        self.tick = np.zeros(1, np.int64)
        cshape = (self.domains, len(points))
        self.accesses = np.zeros(cshape, np.int64)
        self.loads = np.zeros(cshape, np.int64)
        self.misses = np.zeros(cshape, np.int64)
        self.load_misses = np.zeros(cshape, np.int64)
        self.hist = np.zeros(cshape + (geometry.assoc,), np.int64)
        self.load_hist = np.zeros(cshape + (geometry.assoc,), np.int64)

    @classmethod
    def for_variant(cls, geometry, variant, **kwargs):
        return cls(geometry, profiling_points(variant, num_colors(geometry)), **kwargs)

    @property
    def sampled_sets(self):
        return sum(self.rows_per_point)

    def reset_counters(self):
        for arr in (self.accesses, self.loads, self.misses, self.load_misses,
                    self.hist, self.load_hist):
            arr.fill(0)

    def kernel_args(self):
        return (self.pt_colors, self.pt_pow2, self.pt_base, self.tags, self.valid,
                self.dirty, self.owner, self.stamp, self.mru)

    def counter_args(self):
        return (self.accesses, self.loads, self.misses, self.load_misses,
                self.hist, self.load_hist)

    def point_index(self, point):
        try:
            return self.points.index(int(point))
        except ValueError:
            raise ConfigurationError(f"{point} is not a profiling point {self.points}") from None

    def curve(self, domain):
        rs = self.sampling_ratio
        return MissCurve(
            points=self.points,
            misses=tuple(float(v * rs) for v in self.misses[domain]),
            load_misses=tuple(float(v * rs) for v in self.load_misses[domain]),
            accesses=tuple(float(v * rs) for v in self.accesses[domain]),
            loads=tuple(float(v * rs) for v in self.loads[domain]),
        )

    def way_counters(self, domain):
        return WayCounters(self.points, self.hist[domain].copy(),
                           self.load_hist[domain].copy(),
                           self.accesses[domain].copy(), self.loads[domain].copy(),
                           self.sampling_ratio, self.policy)


def rce_access(rce, core_id, block_address, kind):
    """Feed one access; addresses rejected by the sampling filter are ignored."""
    is_store = _kind_is_store(kind)
    return K.rce_event(np.int64(block_address), is_store,
                       int(rce.domain_of_core[core_id]), int(core_id), rce.log_rs,
                       rce.spc_log, rce.n_colors, *rce.kernel_args(),
                       rce.geometry.assoc, rce.policy_code, rce.tick,
                       *rce.counter_args())


def rce_feed(rce, cores, blocks, stores):
    """Batch version of :func:`rce_access` over numpy arrays."""
    return int(K.rce_feed(np.asarray(cores, np.int32), np.asarray(blocks, np.int64),
                          np.asarray(stores, np.uint8), rce.domain_of_core, rce.log_rs,
                          rce.spc_log, rce.n_colors, *rce.kernel_args(),
                          rce.geometry.assoc, rce.policy_code, rce.tick,
                          *rce.counter_args()))


def miss_estimate(rce, core_id, point):
    """Scaled ``(misses, load_misses)`` of the core's domain at ``point`` colors."""
    p = rce.point_index(point)
    d = int(rce.domain_of_core[core_id])
    rs = rce.sampling_ratio
    return int(rce.misses[d, p]) * rs, int(rce.load_misses[d, p]) * rs


@dataclass(frozen=True)
class MissCurve:
    """Scaled per-point estimates for one profiling domain over one interval."""

    points: tuple
    misses: tuple
    load_misses: tuple
    accesses: tuple = ()
    loads: tuple = ()

    def __post_init__(self):
        if any(v < 0 for v in self.misses + self.load_misses):
            raise ValueError("miss counts must be non-negative")

    def to_dict(self):
        return {"points": list(self.points), "misses": list(self.misses),
                "load_misses": list(self.load_misses)}


def interpolate(curve, colors, field="misses"):
    """Piecewise-linear value of ``field`` at ``colors``; returns ``(value, clamped)``."""
    xs = curve.points
    ys = getattr(curve, field)
    if colors <= xs[0]:
        return float(ys[0]), colors < xs[0]
    if colors >= xs[-1]:
        return float(ys[-1]), colors > xs[-1]
    for j in range(len(xs) - 1):
        if xs[j] <= colors <= xs[j + 1]:
            if colors == xs[j]:
                return float(ys[j]), False
            t = (colors - xs[j]) / (xs[j + 1] - xs[j])
            return float(ys[j] + t * (ys[j + 1] - ys[j])), False
    raise AssertionError("unreachable")


def interpolate_misses(curve, colors):
    return interpolate(curve, colors, "misses")[0]


def interpolate_load_misses(curve, colors):
    return interpolate(curve, colors, "load_misses")[0]


def mcu(curve, colors):
    """Misses saved per extra color on the segment containing ``colors``.

    At or beyond the top point the final segment's slope is used.
    """
    xs, ys = curve.points, curve.misses
    if len(xs) < 2:
        return 0.0
    j = 0
    while j < len(xs) - 2 and colors >= xs[j + 1]:
        j += 1
    return (ys[j] - ys[j + 1]) / (xs[j + 1] - xs[j])


@dataclass(frozen=True)
class WayCounters:
    """Mattson hit-position histograms, one row per emulated set-state."""

    set_states: tuple
    hist: np.ndarray
    load_hist: np.ndarray
    accesses: np.ndarray
    loads: np.ndarray
    sampling_ratio: int = 1
    policy: str = "lru"

    @property
    def assoc(self):
        return self.hist.shape[1]


def _check_way_query(wc, set_state, ways):
    if wc.policy != "lru":
        raise ConfigurationError("way profiling relies on the LRU stack property")
    if not 1 <= ways <= wc.assoc:
        raise ValueError(f"ways must lie in 1..{wc.assoc}")
    if not 0 <= set_state < len(wc.set_states):
        raise ValueError(f"unknown set-state index {set_state}")


def way_profile(wc, set_state, ways):
    """Sampled hits of an emulated cache restricted to ``ways`` ways."""
    _check_way_query(wc, set_state, ways)
    return int(wc.hist[set_state, :ways].sum())


def way_load_misses(wc, set_state, ways):
    """Sampled load misses at ``ways`` ways."""
    _check_way_query(wc, set_state, ways)
    return int(wc.loads[set_state] - wc.load_hist[set_state, :ways].sum())


def rce_size(geometry, cores, sampling_ratio, variant, tag_bits):
    """Total sampled sets and the share of L2 storage (percent) they occupy.

    Storage per set is ``tag_bits`` per way against ``block_bits + tag_bits``
    for a real line, so the share is independent of associativity.
    """
    fracs = _fractions(variant)
    sets = Fraction(cores) * sum(fracs) * geometry.sets / sampling_ratio
    block_bits = geometry.block_bytes * 8
    share = sets / geometry.sets * Fraction(tag_bits, block_bits + tag_bits) * 100
    total = int(sets) if sets.denominator == 1 else float(sets)
    return total, float(share)
