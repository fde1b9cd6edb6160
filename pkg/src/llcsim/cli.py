"""``llcsim`` command line: gen-trace, run, compare, sweep, formulas.

Exit status: 0 success, 2 usage/configuration error, 1 runtime failure.
"""

import argparse
import json
import os
import sys
from dataclasses import replace

from . import harness
from .coloring import mapping_table_bits, num_colors
from .cache import derive_geometry
from .energy import PRESETS, decay_interval, preset
from .errors import ConfigurationError, ReportMismatchError, TraceFormatError
from .policies import POLICY_NAMES
from .profiler import VARIANTS, rce_size
from .workload import atomic_write, generate, load_spec, load_trace, trace_bytes
from .config import load_config

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="llcsim", description="Multicore LLC energy simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-trace", help="generate a synthetic trace from a spec file")
    g.add_argument("--spec", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="simulate one policy on a trace")
    r.add_argument("--config", required=True)
    r.add_argument("--trace", required=True)
    r.add_argument("--policy", choices=POLICY_NAMES)
    r.add_argument("--out", required=True)
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("--skip-intervals", type=int)
    r.add_argument("--no-baseline", action="store_true",
                   help="skip the baseline co-simulation (no metrics in the report)")

    c = sub.add_parser("compare", help="metrics of a technique report against a baseline")
    c.add_argument("--base", required=True)
    c.add_argument("--tech", required=True)
    c.add_argument("--out")
    c.add_argument("--format", choices=("json", "csv"), default="csv")

    s = sub.add_parser("sweep", help="run several policies plus the baseline")
    s.add_argument("--config", required=True)
    s.add_argument("--trace", required=True)
    s.add_argument("--policies", required=True, help="comma-separated policy names")
    s.add_argument("--out", required=True)
    s.add_argument("--skip-intervals", type=int)

    f = sub.add_parser("formulas", help="closed-form numbers for a hardware preset")
    f.add_argument("--preset", required=True)
    f.add_argument("--sampling-ratio", type=int, default=64)
    return p


def _scenario(args):
    cfg = load_config(args.config)
    if args.skip_intervals is not None:
        if args.skip_intervals < 0:
            raise UsageError("--skip-intervals must be >= 0")
        cfg = replace(cfg, skip_intervals=args.skip_intervals)
    return cfg, load_trace(args.trace)


def cmd_gen_trace(args, out):
    spec = load_spec(args.spec)
    trace = generate(spec, args.seed)
    atomic_write(args.out, trace_bytes(trace.header, trace))
    print(f"wrote {len(trace)} events to {args.out} "
          f"(fingerprint {trace.header.fingerprint})", file=out)


def _emit_report(report, path, fmt):
    data = harness.report_json(report) if fmt == "json" else harness.report_csv(report)
    atomic_write(path, data)


def cmd_run(args, out):
    cfg, trace = _scenario(args)
    policy = args.policy or cfg.policy
    base = None if args.no_baseline else harness.run_baseline(cfg, trace)
    report = harness.run(cfg, trace, policy, baseline_report=base)
    _emit_report(report, args.out, args.format)
    t = report["totals"]
    print(f"{policy}: {t['intervals']} intervals, energy {t['energy']['total']:.6g} J, "
          f"active ratio {t['active_ratio']:.4f}", file=out)


def _load_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not a JSON report ({exc})") from None
    if not isinstance(data, dict) or data.get("format") != harness.REPORT_FORMAT:
        raise UsageError(f"{path}: not an llcsim JSON report")
    return data


def cmd_compare(args, out):
    base = _load_report(args.base)
    tech = _load_report(args.tech)
    m = harness.compare(base, tech).as_dict()
    if args.format == "json":
        text = json.dumps({"policy": tech["policy"], **m}, sort_keys=True, indent=1) + "\n"
    else:
        keys = sorted(m)
        text = ",".join(["policy"] + keys) + "\n"
        text += ",".join([tech["policy"]] + [format(m[k], ".9g") for k in keys]) + "\n"
    if args.out:
        atomic_write(args.out, text)
    else:
        out.write(text)


def cmd_sweep(args, out):
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    unknown = [p for p in policies if p not in POLICY_NAMES]
    if not policies or unknown:
        raise UsageError(f"--policies must name known policies ({', '.join(POLICY_NAMES)}); "
                         f"bad: {', '.join(unknown) or '(empty)'}")
    cfg, trace = _scenario(args)
    os.makedirs(args.out, exist_ok=True)
    results, failures = {}, {}
    for name, outcome in harness.iter_sweep(cfg, trace, policies):
        if isinstance(outcome, Exception):
            failures[name] = outcome
            print(f"{name}: FAILED: {outcome}", file=sys.stderr)
        else:
            results[name] = outcome
    if "baseline" in results:
        harness.attach_metrics(results)
    for name, report in results.items():
        _emit_report(report, os.path.join(args.out, f"{name}.json"), "json")
    if "baseline" in results and len(results) > 1:
        atomic_write(os.path.join(args.out, "summary.csv"), harness.sweep_csv(results))
    print(f"{len(results)} reports written to {args.out}", file=out)
    if failures:
        return EXIT_RUNTIME
    return EXIT_OK


def formulas(preset_name, sampling_ratio=64):
    """Closed-form quantities for a preset as ``(label, value)`` rows."""
    p = preset(preset_name)
    geo = derive_geometry(p.size_bytes, p.assoc, p.block_bytes, p.page_bytes)
    m = num_colors(geo)
    rows = [("preset", p.name), ("cores", p.cores), ("colors", m),
            ("sets", geo.sets), ("sets_per_color", geo.sets_per_color)]
    for variant in VARIANTS:
        sets, share = rce_size(geo, p.cores, sampling_ratio, variant, p.tag_bits)
        rows.append((f"rce_sets_{variant}", sets))
        rows.append((f"rce_share_pct_{variant}", round(share, 4)))
    rows.append(("mapping_table_bits", mapping_table_bits(p.cores, m)))
    rows.append(("decay_interval_cycles", round(decay_interval(p.params, geo))))
    rows.append(("frequency_hz", p.params.frequency))
    return rows


def cmd_formulas(args, out):
    if args.preset not in PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; known: {', '.join(sorted(PRESETS))}")
    if args.sampling_ratio <= 0 or args.sampling_ratio & (args.sampling_ratio - 1):
        raise UsageError("--sampling-ratio must be a power of two")
    width = max(len(k) for k, _ in formulas(args.preset))
    for key, value in formulas(args.preset, args.sampling_ratio):
        print(f"{key:<{width}}  {value}", file=out)


COMMANDS = {"gen-trace": cmd_gen_trace, "run": cmd_run, "compare": cmd_compare,
            "sweep": cmd_sweep, "formulas": cmd_formulas}


def main(argv=None, out=None):
    out = out or sys.stdout
    args = _parser().parse_args(argv)
    try:
        status = COMMANDS[args.command](args, out)
    except (ConfigurationError, TraceFormatError, ReportMismatchError, UsageError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"llcsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"llcsim {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if status is None else status


if __name__ == "__main__":
    sys.exit(main())
