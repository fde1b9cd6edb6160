"""Structured-text configuration (``key = value`` with ``[sections]``) or JSON.

Both syntaxes load into the same ``{section: {key: value}}`` mapping;
:func:`scenario_from_mapping` validates it into a :class:`ScenarioConfig`.
"""

import configparser
import json
import re
from dataclasses import asdict, dataclass, field, fields, replace

from .cache import derive_geometry
from .energy import EnergyParams, preset
from .errors import ConfigurationError
from .policies import POLICY_NAMES, EncacheParams, MasterParams, PaletteParams


def load_sections(path):
    """Read a config/spec file into ``{section: {key: raw_value}}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    return parse_sections(text, str(path))


def parse_sections(text, source="<string>"):
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigurationError(f"{source}: JSON must map section names to objects")
        return {str(s): dict(v) for s, v in data.items()}
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


_SIZE = re.compile(r"^\s*(\d+)\s*([KMG]?)(I?B)?\s*$", re.IGNORECASE)
_UNITS = {"": 1, "K": 1 << 10, "M": 1 << 20, "G": 1 << 30}


def parse_size(value, where):
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    m = _SIZE.match(str(value))
    if not m:
        raise ConfigurationError(f"{where}: cannot parse size {value!r}")
    return int(m.group(1)) * _UNITS[m.group(2).upper()]


def to_int(value, where):
    if isinstance(value, bool):
        raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}: expected an integer, got {value!r}") from None
    if f != int(f):
        raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
    return int(f)


def to_float(value, where):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}: expected a number, got {value!r}") from None


def to_tuple(value, where):
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = [v for v in str(value).split(",") if v.strip()]
    return tuple(to_float(v, where) for v in items)


def _coerce(value, like, where):
    if isinstance(like, bool):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"{where}: expected a boolean, got {value!r}")
    if isinstance(like, int):
        return to_int(value, where)
    if isinstance(like, float):
        return to_float(value, where)
    if isinstance(like, tuple):
        return to_tuple(value, where)
    if like is None:
        return None if value in (None, "", "none") else to_float(value, where)
    return str(value)


def _fill(obj, section, values):
    """Return a copy of dataclass ``obj`` with ``values`` coerced onto it."""
    known = {f.name for f in fields(obj)}
    updates = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigurationError(f"[{section}] unknown key {key!r}")
        updates[key] = _coerce(raw, getattr(obj, key), f"[{section}] {key}")
    try:
        return replace(obj, **updates)
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"[{section}] {exc}") from exc


@dataclass(frozen=True)
class Overheads:
    algo_master: int = 500
    algo_dct: int = 300
    algo_wac: int = 20
    reconfig: int = 600


@dataclass(frozen=True)
class CashierConfig:
    slack_seconds: float = 0.0
    slack_pct: float = 5.0
    delta_pct: float = 0.3
    reserve_fraction: float = 0.1
    horizon: int = 10
    reach: int = 8
    min_fraction: float = 1 / 16


@dataclass(frozen=True)
class ManagerConfig:
    target: int = 0
    omega_pct: float = 5.0
    chi_pct: float = 0.4
    min_fraction: float = 1 / 32
    max_transfer: int = 12
    thresholds: tuple = (50.0, 200.0, 300.0, 1000.0)
    target_instructions: int = 0   # 0: use the [interval] section as given


@dataclass(frozen=True)
class DctConfig:
    decay_interval: float = None   # None: derived from the energy parameters
    tick_fraction: float = 1 / 16


@dataclass(frozen=True)
class WacConfig:
    t1: float = 0.005
    t2: float = 0.02
    k_hits: int = 100_000
    min_ways: int = 2


@dataclass(frozen=True)
class ScenarioConfig:
    size_bytes: int = 4 << 20
    assoc: int = 8
    block_bytes: int = 64
    page_bytes: int = 4096
    address_bits: int = 45
    replacement: str = "lru"
    preset: str = "cacti32nm-4mb"
    energy: EnergyParams = field(default_factory=EnergyParams)
    interval_mode: str = "cycles"
    interval_length: int = 5_000_000
    poll_cycles: int = 1000
    sampling_ratio: int = 64
    baseline: str = "shared"
    policy: str = "none"
    cores: int = 0          # 0: accept any core count in the trace
    seed: int = 0
    skip_intervals: int = 0
    overheads: Overheads = field(default_factory=Overheads)
    master: MasterParams = field(default_factory=MasterParams)
    palette: PaletteParams = field(default_factory=PaletteParams)
    encache: EncacheParams = field(default_factory=EncacheParams)
    cashier: CashierConfig = field(default_factory=CashierConfig)
    manager: ManagerConfig = field(default_factory=ManagerConfig)
    dct: DctConfig = field(default_factory=DctConfig)
    wac: WacConfig = field(default_factory=WacConfig)

    def geometry(self):
        return derive_geometry(self.size_bytes, self.assoc, self.block_bytes,
                               self.page_bytes, self.address_bits)

    def to_dict(self):
        return asdict(self)


_INTERVAL_KEYS = {"cycles": "cycles", "instructions": "instructions",
                  "target_instructions": "target"}
_SECTIONS = {"cache", "energy", "interval", "sim", "overhead", "master", "palette",
             "encache", "cashier", "manager", "dct", "wac"}


def scenario_from_mapping(sections):
    unknown = set(sections) - _SECTIONS
    if unknown:
        raise ConfigurationError(f"unknown section(s): {', '.join(sorted(unknown))}")
    cfg = ScenarioConfig()
    updates = {}

    cache = dict(sections.get("cache", {}))
    for key in list(cache):
        where = f"[cache] {key}"
        if key in ("size", "size_bytes"):
            updates["size_bytes"] = parse_size(cache.pop(key), where)
        elif key in ("block", "block_bytes"):
            updates["block_bytes"] = parse_size(cache.pop(key), where)
        elif key in ("page", "page_bytes"):
            updates["page_bytes"] = parse_size(cache.pop(key), where)
        elif key in ("assoc", "address_bits"):
            updates[key] = to_int(cache.pop(key), where)
        elif key == "replacement":
            updates[key] = str(cache.pop(key)).strip().lower()
    if cache:
        raise ConfigurationError(f"[cache] unknown key(s): {', '.join(sorted(cache))}")

    energy = dict(sections.get("energy", {}))
    preset_name = str(energy.pop("preset", cfg.preset))
    updates["preset"] = preset_name
    updates["energy"] = _fill(preset(preset_name).params, "energy", energy)

    interval = dict(sections.get("interval", {}))
    modes = [k for k in interval if k in _INTERVAL_KEYS]
    if len(modes) > 1:
        raise ConfigurationError("[interval] give exactly one of cycles, instructions, "
                                 "target_instructions")
    if modes:
        updates["interval_mode"] = _INTERVAL_KEYS[modes[0]]
        updates["interval_length"] = to_int(interval.pop(modes[0]), f"[interval] {modes[0]}")
    if "poll_cycles" in interval:
        updates["poll_cycles"] = to_int(interval.pop("poll_cycles"), "[interval] poll_cycles")
    if interval:
        raise ConfigurationError(f"[interval] unknown key(s): {', '.join(sorted(interval))}")

    sim = dict(sections.get("sim", {}))
    for key in list(sim):
        where = f"[sim] {key}"
        if key in ("sampling_ratio", "seed", "skip_intervals", "cores"):
            updates[key] = to_int(sim.pop(key), where)
        elif key in ("baseline", "policy"):
            updates[key] = str(sim.pop(key)).strip().lower()
    if sim:
        raise ConfigurationError(f"[sim] unknown key(s): {', '.join(sorted(sim))}")

    for section, attr in (("overhead", "overheads"), ("master", "master"),
                          ("palette", "palette"), ("encache", "encache"),
                          ("cashier", "cashier"), ("manager", "manager"), ("dct", "dct"),
                          ("wac", "wac")):
        if section in sections:
            updates[attr] = _fill(getattr(cfg, attr), section, sections[section])

    cfg = replace(cfg, **updates)
    validate(cfg)
    return cfg


def validate(cfg):
    cfg.geometry()
    if cfg.replacement not in ("lru", "fifo", "plru"):
        raise ConfigurationError(f"[cache] replacement must be lru, fifo or plru")
    if cfg.interval_mode not in ("cycles", "instructions", "target"):
        raise ConfigurationError(f"bad interval mode {cfg.interval_mode!r}")
    if cfg.interval_length <= 0 or cfg.poll_cycles <= 0:
        raise ConfigurationError("[interval] lengths must be positive")
    if cfg.baseline not in ("shared", "static-equal-partition"):
        raise ConfigurationError("[sim] baseline must be shared or static-equal-partition")
    if cfg.policy not in POLICY_NAMES:
        raise ConfigurationError(f"[sim] policy must be one of {', '.join(POLICY_NAMES)}")
    if cfg.sampling_ratio <= 0 or cfg.sampling_ratio & (cfg.sampling_ratio - 1):
        raise ConfigurationError("[sim] sampling_ratio must be a power of two")
    if cfg.cores < 0:
        raise ConfigurationError("[sim] cores must be >= 0")
    if cfg.skip_intervals < 0:
        raise ConfigurationError("[sim] skip_intervals must be >= 0")
    if min(asdict(cfg.overheads).values()) < 0:
        raise ConfigurationError("[overhead] values must be >= 0")
    return cfg


def load_config(path):
    return scenario_from_mapping(load_sections(path))
