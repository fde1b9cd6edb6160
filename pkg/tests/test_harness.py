import csv
import io
import json

import pytest

from helpers import conservation_problems, loop, scenario, spec, stream
from llcsim import harness
from llcsim.config import parse_sections, scenario_from_mapping
from llcsim.errors import ConfigurationError, ReportMismatchError
from llcsim.workload import generate

N = 150_000


@pytest.fixture(scope="module")
def mix():
    return generate(spec(loop(24000, N), stream(N)), 1)


@pytest.fixture(scope="module")
def cfg():
    return scenario()


@pytest.fixture(scope="module")
def baseline(cfg, mix):
    return harness.run_baseline(cfg, mix)


@pytest.fixture(scope="module")
def master(cfg, mix, baseline):
    return harness.run(cfg, mix, "master", baseline_report=baseline)


def stripped(report):
    return harness.report_json(report, include_wall_time=False)


def test_policy_none_equals_baseline(cfg, mix, baseline):
    assert stripped(harness.run(cfg, mix, "none")) == stripped(baseline)


def test_baseline_is_fully_active_without_algorithm_energy(baseline, mix):
    assert baseline["energy_mode"] == "baseline"
    assert baseline["totals"]["active_ratio"] == 1.0
    assert baseline["totals"]["energy"]["e_algo"] == 0
    assert baseline["totals"]["rce_accesses"] == 0
    assert conservation_problems(baseline, mix) == []


def test_master_saves_energy_on_a_streaming_mix(master, mix):
    m = master["metrics"]
    assert m["active_ratio"] < 1
    assert m["pct_energy_saved"] > 0
    assert master["totals"]["max_configs_evaluated"] <= 17
    assert conservation_problems(master, mix) == []


def test_overhead_follows_each_decision(master, cfg):
    ov = cfg.overheads
    *decided, last = master["intervals"]
    for rec in decided:
        changed = rec["decision"]["kind"] == "NewAllocation"
        assert rec["overhead_cycles"] == ov.algo_master + (ov.reconfig if changed else 0)
    assert last["overhead_cycles"] == 0
    assert any(r["decision"]["kind"] == "NewAllocation" for r in decided)
    assert any(r["decision"]["kind"] == "NoChange" for r in decided)


def test_totals_recompute_from_intervals(master):
    assert harness.recompute_totals(master) == master["totals"]


def test_static_partition_never_reconfigures(mix):
    cfg = scenario(sim={"baseline": "static-equal-partition"})
    report = harness.run_baseline(cfg, mix)
    for rec in report["intervals"]:
        assert rec["allocation"]["colors"] == [list(range(64)), list(range(64, 128))]
        assert rec["stats"]["transitions"] == 0
    assert report["totals"]["energy"]["e_algo"] == 0


def test_self_compare_is_neutral(baseline):
    m = harness.compare(baseline, baseline)
    assert m.pct_energy_saved == 0 and m.weighted_speedup == 1 and m.fair_speedup == 1


def test_compare_rejects_foreign_traces(cfg, baseline):
    other = harness.run_baseline(cfg, generate(spec(loop(100, 2000), loop(100, 2000)), 2))
    with pytest.raises(ReportMismatchError):
        harness.compare(baseline, other)


def test_dct_keeps_misses_and_turns_lines_off(cfg):
    trace = generate(spec(stream(N), stream(N)), 4)
    base = harness.run_baseline(cfg, trace)
    dct = harness.run(cfg, trace, "dct", baseline_report=base)
    assert dct["totals"]["misses"] == base["totals"]["misses"]
    assert dct["totals"]["active_ratio"] < 1
    assert conservation_problems(dct, trace) == []


def test_wac_ways_stay_in_range(cfg, mix):
    report = harness.run(cfg, mix, "wac")
    ways = [rec["allocation"]["ways"] for rec in report["intervals"]]
    assert all(2 <= w <= 8 for w in ways)
    assert conservation_problems(report, mix) == []


@pytest.mark.parametrize("sections, policy", [
    ({"cache": {"page": "8KB"}}, "none"),
    ({"sim": {"cores": 4}}, "none"),
    ({"manager": {"target": 3}}, "manager"),
    ({}, "manager"),
    ({"cache": {"replacement": "fifo"}}, "encache"),
    ({}, "bogus"),
])
def test_incompatible_setups(mix, sections, policy):
    with pytest.raises(ConfigurationError):
        harness.run(scenario(**sections), mix, policy)


def test_report_csv_layout(master):
    rows = list(csv.reader(io.StringIO(harness.report_csv(master))))
    assert tuple(rows[0]) == harness.INTERVAL_COLUMNS
    blank = rows.index([])
    assert blank == len(master["intervals"]) + 1
    summary = dict(rows[blank + 2:])
    assert summary["policy"] == "master"
    assert float(summary["energy_total"]) == pytest.approx(master["totals"]["energy"]["total"])
    assert float(summary["metric_pct_energy_saved"]) == pytest.approx(
        master["metrics"]["pct_energy_saved"])


def test_sweep_csv_rows_sorted(cfg, mix, baseline, master):
    dct = harness.run(cfg, mix, "dct", baseline_report=baseline)
    rows = list(csv.reader(io.StringIO(
        harness.sweep_csv({"baseline": baseline, "master": master, "dct": dct}))))
    assert tuple(rows[0]) == harness.SUMMARY_COLUMNS
    assert [r[0] for r in rows[1:]] == ["dct", "master"]


def test_report_json_is_stable(master):
    text = harness.report_json(master)
    assert json.loads(text)["policy"] == "master"
    assert "wall_time_seconds" not in json.loads(stripped(master))


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("CACHESIM_THREADS", "3")
    assert harness.thread_cap() == 3
    monkeypatch.setenv("CACHESIM_THREADS", "0")
    assert harness.thread_cap() == 1
    monkeypatch.setenv("CACHESIM_THREADS", "many")
    with pytest.raises(ConfigurationError):
        harness.thread_cap()


INI = """
[cache]
size = 2MB
assoc = 8

[interval]
instructions = 1000000

[sim]
policy = master
sampling_ratio = 32

[master]
"""


def test_ini_and_json_configs_agree():
    from_ini = scenario_from_mapping(parse_sections(INI))
    as_json = json.dumps({"cache": {"size": "2MB", "assoc": 8},
                          "interval": {"instructions": 1_000_000},
                          "sim": {"policy": "master", "sampling_ratio": 32}})
    assert scenario_from_mapping(parse_sections(as_json)) == from_ini
    assert from_ini.size_bytes == 2 << 20 and from_ini.interval_mode == "instructions"
    assert from_ini.energy == scenario_from_mapping({"energy": {"preset": "cacti32nm-4mb"}}
                                                    ).energy


@pytest.mark.parametrize("sections", [
    {"cache": {"colour": 1}},
    {"gpu": {}},
    {"interval": {"cycles": 10, "instructions": 10}},
    {"cache": {"size": "3MB"}},
    {"sim": {"sampling_ratio": 3}},
    {"sim": {"policy": "magic"}},
    {"energy": {"p_off": 2}},
    {"wac": {"t1": "fast"}},
])
def test_config_errors(sections):
    with pytest.raises(ConfigurationError):
        scenario_from_mapping(sections)
