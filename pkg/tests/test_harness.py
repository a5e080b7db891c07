import csv
import json

import numpy as np
import pytest
from scipy.stats import chisquare

from hybridzone.harness import (ConfigError, ExperimentConfig, OperationStream, WorkloadSpec,
                                ZipfSampler, emit_report, load_config, make_key, make_value,
                                run_experiment, zipf_next)
from hybridzone.harness.cli import main
from hybridzone.harness.config import config_from_mapping
from hybridzone.harness.report import COLUMNS
from hybridzone.harness.runner import MetricsReport
from oracles import loglog_slope

MiB = 1024 * 1024


def small(**over):
    base = dict(load_bytes=5 * MiB, ops=300)
    base.update(over)
    return ExperimentConfig(**base)


# -- config -----------------------------------------------------------------

def test_config_file_errors_name_field_and_line(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text("policy: hhzs\nops: 100\nssd_zones: one\n")
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.field == "ssd_zones" and err.value.line == 3
    p.write_text("policy: b9\n")
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.field == "policy" and err.value.line == 1
    p.write_text("seed: 1\nbogus: 2\n")
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert (err.value.field, err.value.line) == ("bogus", 2)
    p.write_text("policy: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_config_file_roundtrip(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text("policy: pmc\nworkload: custom\nread_pct: 100\nzipf_alpha: 1.2\nmigration_rate: 1048576\n")
    cfg = load_config(p)
    assert (cfg.policy, cfg.workload, cfg.read_pct, cfg.zipf_alpha) == ("pmc", "custom", 100.0, 1.2)
    assert cfg.workload_spec().mix() == (100, 0, 0, 0, 0)
    (tmp_path / "empty.yaml").write_text("")
    assert load_config(tmp_path / "empty.yaml") == ExperimentConfig()


@pytest.mark.parametrize("field,value", [("read_pct", 101), ("zipf_alpha", -1), ("ssd_zones", 1),
                                         ("wal_cache_zones", 20), ("target_rate", 0),
                                         ("format", "xml"), ("ops", -1)])
def test_config_validation(field, value):
    with pytest.raises(ConfigError) as err:
        config_from_mapping({field: value})
    assert err.value.field == field


# -- workload generators ------------------------------------------------------

def test_zipf_key_space_one():
    rng = np.random.default_rng(0)
    assert all(zipf_next(0.9, 1, rng) == 0 for _ in range(50))
    with pytest.raises(ValueError):
        zipf_next(0.9, 0, rng)


def test_zipf_slope():
    sampler = ZipfSampler(0.9, 100_000, np.random.Generator(np.random.PCG64(3)))
    draws = np.array([sampler() for _ in range(1_000_000)])
    counts = np.bincount(draws, minlength=100_000)
    top = 1000
    assert loglog_slope(np.arange(1, top + 1), counts[:top]) == pytest.approx(-0.9, abs=0.05)


def test_zipf_next_matches_sampler_distribution():
    rng = np.random.default_rng(5)
    draws = np.bincount([zipf_next(0.9, 50, rng) for _ in range(20_000)], minlength=50)
    weights = np.arange(1, 51) ** -0.9
    expected = 20_000 * weights / weights.sum()
    assert chisquare(draws, expected).pvalue > 0.001


def test_zipf_alpha_zero_is_uniform():
    sampler = ZipfSampler(0.0, 20, np.random.default_rng(11))
    counts = np.bincount([sampler() for _ in range(40_000)], minlength=20)
    assert chisquare(counts).pvalue > 0.001


def test_workload_mixes():
    for name, want in [("a", {"read": 0.5, "update": 0.5}), ("b", {"read": 0.95, "update": 0.05}),
                       ("c", {"read": 1.0}), ("e", {"scan": 0.95, "insert": 0.05}),
                       ("f", {"read": 0.5, "rmw": 0.5})]:
        spec = WorkloadSpec.preset(name, ops=20_000, seed=2)
        ops = [op for op, _, _ in OperationStream(spec, 1000)]
        assert len(ops) == 20_000
        for op, frac in want.items():
            assert ops.count(op) / len(ops) == pytest.approx(frac, abs=0.01)


def test_latest_reads_recent_inserts():
    spec = WorkloadSpec.preset("d", ops=5000, seed=4)
    stream = OperationStream(spec, 1000)
    reads = []
    for op, key, _ in stream:
        if op == "read":
            assert key < stream.key_count
            reads.append(stream.key_count - 1 - key)
    assert np.median(reads) < 100


def test_scan_lengths_and_inserts():
    stream = OperationStream(WorkloadSpec.preset("e", ops=3000, seed=1), 500)
    seen = list(stream)
    inserts = [k for op, k, _ in seen if op == "insert"]
    assert inserts == list(range(500, 500 + len(inserts)))
    assert all(1 <= n <= 100 for op, _, n in seen if op == "scan")


def test_keys_and_values():
    assert len(make_key(7)) == 24 and make_key(7) != make_key(8)
    assert make_key(7) == make_key(7)
    v = make_value(7, 3)
    assert len(v) == 1000 and v != make_value(7, 4)


# -- runs and reports ---------------------------------------------------------

def test_empty_run_gives_header_only_csv(tmp_path):
    rep = MetricsReport(config={})
    path = emit_report(rep, tmp_path, "csv")
    assert path.read_text() == ",".join(COLUMNS) + "\n"
    rep, _ = run_experiment(small(load_bytes=0, ops=0))
    assert emit_report(rep, tmp_path / "b").read_text() == ",".join(COLUMNS) + "\n"


def test_report_sections():
    rep, sim = run_experiment(small(policy="b2"))
    assert sum(rep.ssd_write_share.values()) == pytest.approx(100.0, abs=1e-6)
    assert {"wal", "L0"} <= set(rep.ssd_write_share)
    for v in list(rep.ssd_write_share.values()) + list(rep.ssd_write_fraction.values()):
        assert 0 <= v <= 100
    assert 0 <= rep.reads["hdd_read_pct"] <= 100
    times = [s["time"] for s in rep.samples]
    assert times == sorted(times) and len(times) >= 2
    for op, pct in rep.latency.items():
        assert pct[99.0] <= pct[99.9] <= pct[99.99], op
    assert rep.conservation["balanced"] == 1
    assert rep.summary["run_ops"] == 300
    assert rep.summary["run_throughput"] == pytest.approx(300 / rep.summary["run_time"])


def test_conservation_with_cache_and_migration():
    rep, _ = run_experiment(small(policy="hhzs", load_bytes=20 * MiB, workload="c", ops=1500))
    c = rep.conservation
    assert c["device_bytes_written"] == c["wal"] + c["sst"] + c["cache"] + c["migration"]
    assert c["cache"] > 0 and c["migration"] > 0
    assert rep.memory["cache_index"] == 48 * rep.cache["entries"]


def test_zipf_reads_skew_per_sst_counts():
    rep, _ = run_experiment(small(policy="b1", workload="c", load_bytes=20 * MiB, ops=3000))
    counts = sorted(r["read_count"] for r in rep.sst_reads)
    assert counts[-1] >= 1.5 * np.median(counts)


def test_target_rate_throttles():
    rep, _ = run_experiment(small(target_rate=200.0))
    assert rep.summary["run_throughput"] <= 200.0 * 1.01


def test_same_seed_same_bytes(tmp_path):
    reports = {}
    for fmt in ("csv", "records"):
        a = emit_report(run_experiment(small(seed=7))[0], tmp_path / f"a-{fmt}", fmt).read_bytes()
        b = emit_report(run_experiment(small(seed=7))[0], tmp_path / f"b-{fmt}", fmt).read_bytes()
        assert a == b
        reports[fmt] = a
    other = emit_report(run_experiment(small(seed=8))[0], tmp_path / "c", "csv").read_bytes()
    assert other != reports["csv"]


def test_cli_dump_to_out_dir(tmp_path, capsys):
    out = tmp_path / "res"
    rep, sim = run_experiment(small(load_bytes=2 * MiB, ops=0))
    live = sim.store.live_ssts()[0].sst_id
    assert main(["--load-mib", "2", "--ops", "0", "--out", str(out), "--dump-sst", str(live)]) == 0
    dump = json.loads((out / f"sst-{live}.json").read_text())
    assert dump["sst_id"] == live and dump["entries"]


def test_csv_values_are_numeric(tmp_path):
    rep, _ = run_experiment(small())
    with open(emit_report(rep, tmp_path)) as f:
        rows = list(csv.DictReader(f))
    assert rows and all(float(r["value"]) == float(r["value"]) for r in rows)
    sections = {r["section"] for r in rows}
    assert {"summary", "sample", "ssd_write", "latency", "sst_reads", "conservation"} <= sections


# -- CLI -----------------------------------------------------------------------

def test_cli_run_report_and_dump(tmp_path, capsys):
    out = tmp_path / "res"
    trace = tmp_path / "hints.jsonl"
    rc = main(["--policy", "p", "--workload", "b", "--ops", "200", "--load-mib", "5",
               "--out", str(out), "--format", "records", "--hint-trace", str(trace)])
    text = capsys.readouterr().out
    assert rc == 0 and text.startswith("p workload=b")
    records = [json.loads(x) for x in (out / "report.jsonl").read_text().splitlines()]
    assert records[0]["record"] == "config" and records[0]["policy"] == "p"
    assert records[0]["load_bytes"] == 5 * MiB
    hints = [json.loads(x) for x in trace.read_text().splitlines()]
    assert {h["type"] for h in hints} >= {"Flush", "CompactionBegin", "CompactionOutput", "CompactionEnd"}


def test_cli_dump_and_errors(tmp_path, capsys):
    assert main(["--load-mib", "2", "--ops", "0", "--dump-sst", "999999"]) == 1
    assert "no live SST" in capsys.readouterr().err
    cfg = tmp_path / "c.yaml"
    cfg.write_text("ops: 0\nload_bytes: 1048576\nseed: x\n")
    assert main(["--config", str(cfg)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_cli_dumps_a_live_sst(capsys):
    rep, sim = run_experiment(small(ops=0))
    sst = sim.store.live_ssts()[0]
    from hybridzone.harness.cli import dump_sst
    dump = dump_sst(sim, sst.sst_id)
    assert dump["entry_count"] == len(dump["entries"]) == sst.contents.entry_count
    assert dump["entries"][0]["key"] == sst.min_key.decode()
    assert [i["offset"] for i in dump["index"]] == sst.contents.index_offsets
    assert dump["index"][-1]["last_key"] == sst.max_key.decode()
