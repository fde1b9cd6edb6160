"""Trace-driven multicore last-level-cache simulator with energy-saving policies."""

from .cache import CacheGeometry, CacheState, access, derive_geometry, flush_color
from .coloring import Allocation, ColorMap, choose_colors, even_split, plan_reallocation
from .config import ScenarioConfig, load_config, scenario_from_mapping
from .energy import EnergyParams, PRESETS, energy, metrics, preset
from .errors import (ConfigurationError, InvariantViolation, ReportMismatchError,
                     TraceFormatError)
from .harness import compare, run, run_baseline, sweep
from .profiler import MissCurve, RceState, miss_estimate, profiling_points
from .workload import (SyntheticSpec, Trace, TraceEvent, TraceHeader, generate, load_spec,
                       load_trace, read_trace, write_trace)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "CacheGeometry", "CacheState", "ColorMap", "ConfigurationError",
    "EnergyParams", "InvariantViolation", "MissCurve", "PRESETS", "RceState",
    "ReportMismatchError", "ScenarioConfig", "SyntheticSpec", "Trace", "TraceEvent",
    "TraceFormatError", "TraceHeader", "access", "choose_colors", "compare",
    "derive_geometry", "energy", "even_split", "flush_color", "generate", "load_config",
    "load_spec", "load_trace", "metrics", "miss_estimate", "plan_reallocation", "preset",
    "profiling_points", "read_trace", "run", "run_baseline", "sweep", "write_trace",
]
