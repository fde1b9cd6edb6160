"""Trace file format, reader/writer and a seeded synthetic multicore generator.

File layout::

    # version=1
    # cores=2
    # address_bits=45
    # page_bytes=4096
    # core.0.base_cpi=1.0
    # core.0.miss_penalty=200.0
    # core.0.overlap=1.0
    ...
    # fingerprint=<hex>
    0 1a2b3c L 7
    1 ff00 S 3

Each event line is ``<core> <hex block address> <L|S> <instr_delta>``.
"""

import hashlib
import json
import math
import os
import re
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .cache import LOAD, STORE, is_power_of_two
from .config import load_sections, parse_sections, to_float, to_int
from .errors import ConfigurationError, TraceFormatError

TRACE_VERSION = 1
PATTERNS = ("loop", "stream", "random")
_PATTERN_KEY = {"loop": "wss_blocks", "stream": "stride_blocks", "random": "footprint_blocks"}


@dataclass(frozen=True)
class TraceEvent:
    core: int
    block_address: int
    kind: str
    instr_delta: int

    def __post_init__(self):
        if self.kind not in (LOAD, STORE):
            raise ValueError(f"kind must be {LOAD!r} or {STORE!r}")
        if self.instr_delta < 1 or self.core < 0 or self.block_address < 0:
            raise ValueError("core and address must be >= 0, instr_delta >= 1")


@dataclass(frozen=True)
class CoreTiming:
    base_cpi: float = 1.0
    miss_penalty: float = 200.0
    overlap: float = 1.0

    def __post_init__(self):
        if not (self.base_cpi > 0 and self.miss_penalty > 0 and 0 < self.overlap <= 1):
            raise ValueError("base_cpi and miss_penalty must be > 0, overlap in (0, 1]")

    @property
    def stall_per_miss(self):
        return self.miss_penalty * self.overlap


@dataclass(frozen=True)
class TraceHeader:
    cores: int
    timing: tuple
    address_bits: int = 45
    page_bytes: int = 4096
    fingerprint: str = ""
    version: int = TRACE_VERSION

    def __post_init__(self):
        if self.cores < 1 or len(self.timing) != self.cores:
            raise ValueError("need one timing record per core")
        if self.address_bits < 1 or not is_power_of_two(self.page_bytes):
            raise ValueError("address_bits must be positive, page_bytes a power of two")

    def lines(self):
        out = [f"version={self.version}", f"cores={self.cores}",
               f"address_bits={self.address_bits}", f"page_bytes={self.page_bytes}"]
        for i, t in enumerate(self.timing):
            out += [f"core.{i}.base_cpi={t.base_cpi!r}",
                    f"core.{i}.miss_penalty={t.miss_penalty!r}",
                    f"core.{i}.overlap={t.overlap!r}"]
        out.append(f"fingerprint={self.fingerprint}")
        return [f"# {line}\n" for line in out]


@dataclass
class Trace:
    """A whole trace held as parallel arrays (the simulator's input form)."""

    header: TraceHeader
    core: np.ndarray
    block: np.ndarray
    store: np.ndarray
    instr: np.ndarray

    def __post_init__(self):
        self.core = np.ascontiguousarray(self.core, dtype=np.int32)
        self.block = np.ascontiguousarray(self.block, dtype=np.int64)
        self.store = np.ascontiguousarray(self.store, dtype=np.uint8)
        self.instr = np.ascontiguousarray(self.instr, dtype=np.int64)
        n = len(self.core)
        if not len(self.block) == len(self.store) == len(self.instr) == n:
            raise ValueError("trace arrays differ in length")

    def __len__(self):
        return len(self.core)

    def __iter__(self):
        for c, b, s, d in zip(self.core.tolist(), self.block.tolist(),
                              self.store.tolist(), self.instr.tolist()):
            yield TraceEvent(c, b, STORE if s else LOAD, d)

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.header == other.header and np.array_equal(self.core, other.core)
                and np.array_equal(self.block, other.block)
                and np.array_equal(self.store, other.store)
                and np.array_equal(self.instr, other.instr))

    @classmethod
    def from_events(cls, header, events):
        events = list(events)
        return cls(header,
                   np.array([e.core for e in events], dtype=np.int32),
                   np.array([e.block_address for e in events], dtype=np.int64),
                   np.array([e.kind == STORE for e in events], dtype=np.uint8),
                   np.array([e.instr_delta for e in events], dtype=np.int64))


# ---------------------------------------------------------------- writing

def _event_lines(trace):
    kinds = ("L", "S")
    return [f"{c} {b:x} {kinds[s]} {d}\n" for c, b, s, d in
            zip(trace.core.tolist(), trace.block.tolist(), trace.store.tolist(),
                trace.instr.tolist())]


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode("utf-8") if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_bytes(header, events=None):
    trace = events if isinstance(events, Trace) else Trace.from_events(header, events or ())
    _check_events(header, trace)
    return "".join(header.lines() + _event_lines(trace)).encode("utf-8")


def write_trace(path, header, events=None):
    """Write ``events`` (a :class:`Trace` or iterable of :class:`TraceEvent`)."""
    if isinstance(header, Trace):
        header, events = header.header, header
    atomic_write(path, trace_bytes(header, events))


def _check_events(header, trace):
    if len(trace) == 0:
        return
    if trace.core.min() < 0 or trace.core.max() >= header.cores:
        raise ValueError("event core id out of range")
    if trace.instr.min() < 1:
        raise ValueError("instr_delta must be >= 1")
    if trace.block.min() < 0 or int(trace.block.max()) >= 1 << header.address_bits:
        raise ValueError("block address exceeds address_bits")


# ---------------------------------------------------------------- reading

_HEADER = re.compile(rb"# ([A-Za-z0-9_.]+)=(.*)")
_EVENT = re.compile(rb"(0|[1-9][0-9]*) ([0-9a-f]+) ([LS]) ([1-9][0-9]*)")


def _parse_header(lines, source):
    """Consume ``# key=value`` lines; returns (header, index of first event line)."""
    values, offset, idx = {}, 0, 0
    while idx < len(lines) and lines[idx].startswith(b"#"):
        m = _HEADER.fullmatch(lines[idx])
        if m is None:
            raise TraceFormatError(f"{source}: malformed header line", idx + 1, offset)
        key, raw = m.group(1).decode(), m.group(2).decode()
        if idx == 0 and key != "version":
            raise TraceFormatError(f"{source}: first header line must be version", 1, 0)
        if key in values:
            raise TraceFormatError(f"{source}: duplicate header key {key!r}", idx + 1, offset)
        values[key] = (raw, idx + 1, offset)
        offset += len(lines[idx]) + 1
        idx += 1
    if "version" not in values:
        raise TraceFormatError(f"{source}: missing version header", 1, 0)

    def get(key, conv, default=None):
        if key not in values:
            if default is None:
                raise TraceFormatError(f"{source}: missing header key {key!r}", idx + 1, offset)
            return default
        raw, line, off = values.pop(key)
        try:
            return conv(raw)
        except ValueError:
            raise TraceFormatError(f"{source}: bad value for {key!r}: {raw!r}", line, off) from None

    version = get("version", int)
    if version != TRACE_VERSION:
        raise TraceFormatError(f"{source}: unsupported trace version {version}", 1, 0)
    cores = get("cores", int)
    address_bits = get("address_bits", int, 45)
    page_bytes = get("page_bytes", int, 4096)
    fingerprint = get("fingerprint", str, "")
    timing = []
    for core in range(max(cores, 0)):
        d = CoreTiming()
        timing.append(CoreTiming(get(f"core.{core}.base_cpi", float, d.base_cpi),
                                 get(f"core.{core}.miss_penalty", float, d.miss_penalty),
                                 get(f"core.{core}.overlap", float, d.overlap)))
    if values:
        key, (_, line, off) = next(iter(values.items()))
        raise TraceFormatError(f"{source}: unknown header key {key!r}", line, off)
    try:
        header = TraceHeader(cores, tuple(timing), address_bits, page_bytes, fingerprint,
                             version)
    except ValueError as exc:
        raise TraceFormatError(f"{source}: {exc}", 1, 0) from None
    return header, idx, offset


def _split(data, source):
    if data and not data.endswith(b"\n"):
        lines = data.split(b"\n")
        raise TraceFormatError(f"{source}: truncated file (last line has no newline)",
                               len(lines), len(data) - len(lines[-1]))
    return data.split(b"\n")[:-1]


def _events(lines, start, offset, header, source):
    limit = 1 << header.address_bits
    for idx in range(start, len(lines)):
        raw = lines[idx]
        m = _EVENT.fullmatch(raw)
        if m is None:
            raise TraceFormatError(f"{source}: malformed event {raw[:60]!r}", idx + 1,
                                   offset + _first_bad(raw))
        core, block = int(m.group(1)), int(m.group(2), 16)
        if core >= header.cores:
            raise TraceFormatError(f"{source}: core {core} out of range", idx + 1, offset)
        if block >= limit:
            raise TraceFormatError(f"{source}: address exceeds address_bits", idx + 1,
                                   offset + len(m.group(1)) + 1)
        yield core, block, m.group(3) == b"S", int(m.group(4))
        offset += len(raw) + 1


def _first_bad(raw):
    """Byte position (within the line) where an event line stops being valid."""
    parts = raw.split(b" ")
    pos = 0
    checks = (rb"0|[1-9][0-9]*", rb"[0-9a-f]+", rb"[LS]", rb"[1-9][0-9]*")
    for part, pat in zip(parts, checks):
        if re.fullmatch(pat, part) is None:
            return pos
        pos += len(part) + 1
    return min(pos, len(raw))


def read_trace(path):
    """Return ``(header, iterator of TraceEvent)``; the iterator validates lazily."""
    source = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    lines = _split(data, source)
    header, start, offset = _parse_header(lines, source)

    def iterator():
        kinds = (LOAD, STORE)
        for c, b, s, d in _events(lines, start, offset, header, source):
            yield TraceEvent(c, b, kinds[s], d)

    return header, iterator()


def load_trace(path):
    """Parse a whole trace file into a :class:`Trace`."""
    source = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()
    lines = _split(data, source)
    header, start, offset = _parse_header(lines, source)
    n = len(lines) - start
    core = np.empty(n, np.int32)
    block = np.empty(n, np.int64)
    store = np.empty(n, np.uint8)
    instr = np.empty(n, np.int64)
    for i, (c, b, s, d) in enumerate(_events(lines, start, offset, header, source)):
        core[i], block[i], store[i], instr[i] = c, b, s, d
    return Trace(header, core, block, store, instr)


# ---------------------------------------------------------------- generator spec

@dataclass(frozen=True)
class Phase:
    pattern: str
    size_blocks: int
    duration_events: int
    store_fraction: float = 0.0
    events_per_kilo_instr: float = 20.0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {', '.join(PATTERNS)}")
        if self.size_blocks < 1 or self.duration_events < 1:
            raise ValueError("size and duration must be positive")
        if not 0.0 <= self.store_fraction <= 1.0:
            raise ValueError("store_fraction must be in [0, 1]")
        if not 0.0 < self.events_per_kilo_instr <= 1000.0:
            raise ValueError("events_per_kilo_instr must be in (0, 1000]")


@dataclass(frozen=True)
class CoreSpec:
    phases: tuple
    timing: CoreTiming = field(default_factory=CoreTiming)

    @property
    def events(self):
        return sum(p.duration_events for p in self.phases)


@dataclass(frozen=True)
class SyntheticSpec:
    cores: tuple
    address_bits: int = 45
    page_bytes: int = 4096
    block_bytes: int = 64

    def __post_init__(self):
        if not self.cores or any(not c.phases for c in self.cores):
            raise ValueError("every core needs at least one phase")
        if not (is_power_of_two(self.page_bytes) and is_power_of_two(self.block_bytes)
                and self.block_bytes <= self.page_bytes):
            raise ValueError("page and block sizes must be powers of two, block <= page")
        core_bits = max(0, math.ceil(math.log2(len(self.cores))))
        if self.address_bits - int(math.log2(self.page_bytes)) - core_bits < 1:
            raise ValueError("address_bits too small for the page size and core count")

    def to_dict(self):
        return asdict(self)

    def header(self, fingerprint=""):
        return TraceHeader(len(self.cores), tuple(c.timing for c in self.cores),
                           self.address_bits, self.page_bytes, fingerprint)


_CORE_SECTION = re.compile(r"core\.(\d+)")
_PHASE_SECTION = re.compile(r"core\.(\d+)\.phase\.(\d+)")


def spec_from_mapping(sections):
    """Build a spec from ``{section: {key: value}}`` (``[trace]``, ``[core.N]``,
    ``[core.N.phase.K]``)."""
    trace_opts = dict(sections.get("trace", {}))
    timings, phases = {}, {}
    for name, values in sections.items():
        if name == "trace":
            continue
        if m := _PHASE_SECTION.fullmatch(name):
            phases.setdefault(int(m.group(1)), {})[int(m.group(2))] = (name, dict(values))
        elif m := _CORE_SECTION.fullmatch(name):
            timings[int(m.group(1))] = (name, dict(values))
        else:
            raise ConfigurationError(f"unknown section [{name}]")
    n = max(list(timings) + list(phases), default=-1) + 1
    if n == 0:
        raise ConfigurationError("spec defines no cores (expected [core.0.phase.0])")

    cores = []
    for core in range(n):
        if core not in phases:
            raise ConfigurationError(f"[core.{core}] has no phases")
        name, values = timings.get(core, (f"core.{core}", {}))
        timing = _timing(name, values)
        plist = []
        order = sorted(phases[core])
        if order != list(range(len(order))):
            raise ConfigurationError(f"[core.{core}] phases must be numbered 0..{len(order) - 1}")
        for k in order:
            plist.append(_phase(*phases[core][k]))
        cores.append(CoreSpec(tuple(plist), timing))

    kwargs = {}
    for key in list(trace_opts):
        if key not in ("address_bits", "page_bytes", "block_bytes"):
            raise ConfigurationError(f"[trace] unknown key {key!r}")
        kwargs[key] = to_int(trace_opts[key], f"[trace] {key}")
    try:
        return SyntheticSpec(tuple(cores), **kwargs)
    except ValueError as exc:
        raise ConfigurationError(f"[trace] {exc}") from None


def _timing(section, values):
    unknown = set(values) - {"base_cpi", "miss_penalty", "overlap"}
    if unknown:
        raise ConfigurationError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")
    d = CoreTiming()
    try:
        return CoreTiming(*(to_float(values.get(k, getattr(d, k)), f"[{section}] {k}")
                            for k in ("base_cpi", "miss_penalty", "overlap")))
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {exc}") from None


def _phase(section, values):
    pattern = str(values.pop("pattern", "")).strip().lower()
    if pattern not in PATTERNS:
        raise ConfigurationError(f"[{section}] pattern must be one of {', '.join(PATTERNS)}")
    size_key = _PATTERN_KEY[pattern]
    if size_key not in values:
        raise ConfigurationError(f"[{section}] {pattern} pattern needs {size_key}")
    size = to_int(values.pop(size_key), f"[{section}] {size_key}")
    if "duration_events" not in values:
        raise ConfigurationError(f"[{section}] missing duration_events")
    duration = to_int(values.pop("duration_events"), f"[{section}] duration_events")
    store = to_float(values.pop("store_fraction", 0.0), f"[{section}] store_fraction")
    epki = to_float(values.pop("events_per_kilo_instr", 20.0),
                    f"[{section}] events_per_kilo_instr")
    if values:
        raise ConfigurationError(f"[{section}] unknown key(s): {', '.join(sorted(values))}")
    try:
        return Phase(pattern, size, duration, store, epki)
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {exc}") from None


def load_spec(path):
    return spec_from_mapping(load_sections(path))


def parse_spec(text):
    return spec_from_mapping(parse_sections(text))


# ---------------------------------------------------------------- generation

def fingerprint(spec, seed):
    blob = json.dumps({"seed": int(seed), "spec": spec.to_dict()}, sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _core_stream(spec, core, core_spec, seed):
    rng = np.random.default_rng([int(seed), core])
    bpp = spec.page_bytes // spec.block_bytes
    vblocks, stores, instr = [], [], []
    pages = 0
    for phase in core_spec.phases:
        n = phase.duration_events
        idx = np.arange(n, dtype=np.int64)
        if phase.pattern == "loop":
            v = idx % phase.size_blocks
            span = phase.size_blocks
        elif phase.pattern == "stream":
            v = idx * phase.size_blocks
            span = (n - 1) * phase.size_blocks + 1
        else:
            v = rng.integers(0, phase.size_blocks, n, dtype=np.int64)
            span = phase.size_blocks
        vblocks.append(v + pages * bpp)
        pages += -(-span // bpp)
        stores.append(rng.random(n) < phase.store_fraction)
        instr.append(rng.geometric(min(1.0, phase.events_per_kilo_instr / 1000.0), n))
    v = np.concatenate(vblocks)

    core_bits = max(0, math.ceil(math.log2(len(spec.cores))))
    page_bits = spec.address_bits - int(math.log2(spec.page_bytes)) - core_bits
    space = 1 << page_bits
    if pages > space:
        raise ConfigurationError(f"core {core} needs {pages} pages, only {space} available")
    physical = rng.choice(space, size=pages, replace=False) + (core << page_bits)
    blocks = physical[v // bpp].astype(np.int64) * bpp + v % bpp
    return blocks, np.concatenate(stores), np.concatenate(instr).astype(np.int64)


def generate(spec, seed):
    """Deterministic trace for ``(spec, seed)``; each core's pages are placed randomly
    in a private slice of the address space and the cores are merged by a proportional
    round-robin."""
    streams = [_core_stream(spec, c, cs, seed) for c, cs in enumerate(spec.cores)]
    keys, cores = [], []
    for c, (blocks, _, _) in enumerate(streams):
        n = len(blocks)
        keys.append((np.arange(n) + 0.5) / n)
        cores.append(np.full(n, c, dtype=np.int32))
    key = np.concatenate(keys)
    core = np.concatenate(cores)
    order = np.lexsort((core, key))
    block = np.concatenate([s[0] for s in streams])[order]
    store = np.concatenate([s[1] for s in streams])[order]
    instr = np.concatenate([s[2] for s in streams])[order]
    header = spec.header(fingerprint(spec, seed))
    return Trace(header, core[order], block, store, instr)
