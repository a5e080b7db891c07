"""Command-line entry point: ``hybridzone --policy hhzs --workload a --out results/``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..lsm.sstable import iter_raw
from .config import (FORMATS, POLICIES, WORKLOADS, ConfigError, ExperimentConfig,
                     config_from_mapping, load_config)
from .report import emit_report
from .runner import run_experiment

MiB = 1024 * 1024

# CLI flag -> config field; every flag defaults to None so that only the
# flags actually given override the config file.
_FLAGS = {
    "policy": dict(choices=POLICIES),
    "workload": dict(choices=WORKLOADS),
    "read_pct": dict(type=float, help="read percentage for --workload custom"),
    "zipf_alpha": dict(type=float),
    "ops": dict(type=int, help="operations in the run phase"),
    "target_rate": dict(type=float, help="throttle the run phase to this many ops/s"),
    "seed": dict(type=int),
    "ssd_zones": dict(type=int),
    "migration_rate": dict(type=float, help="MiB/s"),
    "wal_cache_zones": dict(type=int),
    "load_mib": dict(type=float, help="MiB of objects to load before the run"),
    "out": dict(metavar="DIR"),
    "format": dict(choices=FORMATS),
    "dump_sst": dict(type=int, metavar="ID", help="dump a live SST after the run"),
    "hint_trace": dict(metavar="FILE", help="write every published hint as JSON lines"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridzone", description=__doc__)
    p.add_argument("--config", metavar="YAML", help="experiment config file; flags override it")
    for name, kw in _FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **kw)
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base = load_config(args.config) if args.config else ExperimentConfig()
    over = {k: getattr(args, k) for k in _FLAGS if getattr(args, k) is not None}
    if "migration_rate" in over:
        over["migration_rate"] *= MiB
    if "load_mib" in over:
        over["load_bytes"] = int(over.pop("load_mib") * MiB)
    return config_from_mapping(over, base=base) if over else base


def dump_sst(sim, sst_id: int) -> dict:
    """Metadata, index block and entries of a live SST."""
    sst = sim.store.ssts.get(sst_id)
    if sst is None or not sst.live:
        raise KeyError(f"no live SST with id {sst_id}")
    data = sim.system.storage.read_bytes(sst.location, 0, sst.data_size)
    entries = [{"key": k.decode("ascii", "replace"), "seqno": seq, "tombstone": dead,
                "bytes": len(enc)} for k, seq, dead, enc in iter_raw(data, sst.contents.index_offset)]
    return {"sst_id": sst.sst_id, "level": sst.level, "device": sst.location.device.value,
            "zones": list(sst.location.zones), "size": sst.data_size,
            "min_key": sst.min_key.decode("ascii", "replace"),
            "max_key": sst.max_key.decode("ascii", "replace"),
            "read_count": sst.read_count, "created_at": sst.created_at,
            "entry_count": sst.contents.entry_count,
            "index": [{"last_key": k.decode("ascii", "replace"), "offset": off}
                      for k, off in zip(sst.contents.index_keys, sst.contents.index_offsets)],
            "entries": entries}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    rep, sim = run_experiment(cfg)
    s = rep.summary
    print(f"{cfg.policy} workload={cfg.workload} seed={cfg.seed} "
          f"load={s.get('load_throughput', 0):.1f} ops/s run={s.get('run_throughput', 0):.1f} ops/s "
          f"hdd_read={rep.reads.get('hdd_read_pct', 0):.1f}% sim_time={s['sim_time']:.2f}s")
    if cfg.out:
        path = emit_report(rep, cfg.out, cfg.format)
        print(f"report: {path}")
    if cfg.dump_sst is not None:
        try:
            dump = dump_sst(sim, cfg.dump_sst)
        except KeyError as exc:
            print(exc.args[0], file=sys.stderr)
            return 1
        text = json.dumps(dump, indent=1)
        if cfg.out:
            p = Path(cfg.out) / f"sst-{cfg.dump_sst}.json"
            p.write_text(text + "\n")
            print(f"sst dump: {p}")
        else:
            print(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
