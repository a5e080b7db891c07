"""Machine-readable output of a :class:`MetricsReport`.

CSV output is one long table with the columns below; every value is a
number.  ``label`` carries the category, level, percentile or operation a
row refers to, ``time`` is the simulated time of samples (empty otherwise).

    section      metric                     label
    summary      ops_total, run_throughput  -
    sample       level_size, level_files    L0..L6
    sample       ssd_free_zones, ...        -
    ssd_write    share_pct, fraction_pct    wal, L0..L6, cache, migration
    traffic      ssd_written, hdd_read ...  category
    reads        hdd_read_pct, ...          -
    latency      seconds                    <op>:p99 / p99.9 / p99.99
    sst_reads    read_count                 sst id
    cache        hits, misses, ...          -
    migration    bytes                      job id
    conservation device_bytes_written, ...  -
    memory       cache_index, ...           -

Latency is completion time minus issue time on the simulated clock.
The structured-records format writes the same information as one JSON
object per line, with the config as the first record.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .runner import MetricsReport

COLUMNS = ("section", "metric", "label", "time", "value")
SAMPLE_SCALARS = ("ssd_free_zones", "wal_zones", "immutables", "tiering_level", "reserved",
                  "max_level", "cache_zones")


def _num(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def report_rows(rep: MetricsReport):
    """Yield ``(section, metric, label, time, value)`` tuples."""
    if rep.empty:
        return
    for k, v in rep.summary.items():
        yield "summary", k, "", "", v
    for s in rep.samples:
        t = s["time"]
        for lvl, size in enumerate(s["level_sizes"]):
            yield "sample", "level_size", f"L{lvl}", t, size
        for lvl, n in enumerate(s["level_files"]):
            yield "sample", "level_files", f"L{lvl}", t, n
        for k in SAMPLE_SCALARS:
            if k in s:
                yield "sample", k, "", t, s[k]
    for c, v in rep.ssd_write_share.items():
        yield "ssd_write", "share_pct", c, "", v
    for c, v in rep.ssd_write_fraction.items():
        yield "ssd_write", "fraction_pct", c, "", v
    for c, d in rep.traffic.items():
        for k, v in d.items():
            yield "traffic", k, c, "", v
    for k, v in rep.reads.items():
        yield "reads", k, "", "", v
    for op, pct in rep.latency.items():
        for p, v in pct.items():
            yield "latency", "seconds", f"{op}:p{p:g}", "", v
    for r in rep.sst_reads:
        yield "sst_reads", "read_count", f"{r['level']}:{r['device']}:{r['sst_id']}", "", r["read_count"]
    for k, v in rep.cache.items():
        yield "cache", k, "", "", v
    for m in rep.migrations:
        yield "migration", f"{m['direction']}:{m['reason']}:{m['status']}", str(m["job_id"]), m["start"], m["bytes"]
    for k, v in rep.conservation.items():
        yield "conservation", k, "", "", v
    for k, v in rep.memory.items():
        yield "memory", k, "", "", v


def write_csv(rep: MetricsReport, path: Path) -> Path:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COLUMNS)
        for section, metric, label, t, v in report_rows(rep):
            w.writerow((section, metric, label, "" if t == "" else _num(t), _num(v)))
    return path


def report_records(rep: MetricsReport):
    yield {"record": "config", **rep.config}
    if rep.empty:
        return
    yield {"record": "summary", **rep.summary}
    for s in rep.samples:
        yield {"record": "sample", **s}
    yield {"record": "ssd_write", "share_pct": rep.ssd_write_share,
           "fraction_pct": rep.ssd_write_fraction}
    yield {"record": "traffic", **rep.traffic}
    yield {"record": "reads", **rep.reads}
    yield {"record": "latency",
           **{op: {f"p{p:g}": v for p, v in pct.items()} for op, pct in rep.latency.items()}}
    for r in rep.sst_reads:
        yield {"record": "sst_reads", **r}
    if rep.cache:
        yield {"record": "cache", **rep.cache}
    for m in rep.migrations:
        yield {"record": "migration", **m}
    yield {"record": "conservation", **rep.conservation}
    yield {"record": "memory", **rep.memory}


def write_records(rep: MetricsReport, path: Path) -> Path:
    with open(path, "w") as f:
        for rec in report_records(rep):
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def emit_report(rep: MetricsReport, out_dir: str | Path, fmt: str = "csv") -> Path:
    """Write ``rep`` under ``out_dir`` and return the file path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        return write_csv(rep, out / "report.csv")
    if fmt == "records":
        return write_records(rep, out / "report.jsonl")
    raise ValueError(f"unknown report format {fmt!r}")
