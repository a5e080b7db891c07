"""Run a load phase and a workload phase on the simulated clock."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import simpy

from ..baselines import AutoPolicy
from ..device import DeviceKind
from ..placement import WriteGuidedPlacement
from ..ssd_cache import memory_accounting
from .config import ExperimentConfig, validate
from .system import System, build_system
from .workload import OperationStream, make_key, make_value

PERCENTILES = (99.0, 99.9, 99.99)
WRITE_OPS = frozenset(("load", "update", "insert", "rmw"))


@dataclass
class MetricsReport:
    config: dict
    summary: dict = field(default_factory=dict)
    samples: list[dict] = field(default_factory=list)
    ssd_write_share: dict = field(default_factory=dict)
    ssd_write_fraction: dict = field(default_factory=dict)
    traffic: dict = field(default_factory=dict)
    reads: dict = field(default_factory=dict)
    sst_reads: list[dict] = field(default_factory=list)
    latency: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)
    migrations: list[dict] = field(default_factory=list)
    conservation: dict = field(default_factory=dict)
    memory: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return not self.summary.get("ops_total")


def percentiles(values) -> dict[float, float]:
    if not len(values):
        return {}
    arr = np.asarray(values, dtype=np.float64)
    return {p: float(np.percentile(arr, p, method="higher")) for p in PERCENTILES}


class Simulation:
    def __init__(self, cfg: ExperimentConfig, lsm=None):
        self.cfg = validate(cfg)
        self.env = simpy.Environment()
        self.system: System = build_system(
            cfg.policy, self.env, ssd_zones=cfg.ssd_zones, wal_cache_zones=cfg.wal_cache_zones,
            migration_rate=cfg.migration_rate, lsm=lsm)
        self.store = self.system.store
        self._event = self.env.event()
        self.samples: list[dict] = []
        self.latencies: dict[str, list[float]] = defaultdict(list)
        self.phase_times: dict[str, tuple[float, float]] = {}
        self.phase_ops: dict[str, int] = {}
        self.versions: dict[int, int] = {}
        self.stall_time = 0.0
        self.trace_file = None

    # -- signalling -------------------------------------------------------

    def _signal(self) -> None:
        ev, self._event = self._event, self.env.event()
        ev.succeed()

    # -- background work --------------------------------------------------

    def _start(self, job) -> None:
        try:
            t = next(job)
        except StopIteration:
            self._job_done()
            return
        self.env.process(self._drive(job, t))

    def _drive(self, job, t):
        env = self.env
        while True:
            if t > env.now:
                yield env.timeout(t - env.now)
            try:
                t = next(job)
            except StopIteration:
                break
        self._job_done()

    def _job_done(self) -> None:
        self._migration_step()
        self._signal()

    def _dispatch(self) -> None:
        store = self.store
        if store.needs_flush():
            self._start(store.flush_job())
        while True:
            pick = store.pick_compaction()
            if pick is None:
                break
            self._start(store.compaction_job(pick))

    def _scheduler(self):
        while True:
            self._dispatch()
            yield self._event

    def _migration_step(self) -> None:
        mig = self.system.migrator
        if mig is not None and mig.idle and mig.step(self.env.now):
            self.env.process(self._migration_worker())

    def _migration_worker(self):
        mig = self.system.migrator
        env = self.env
        while mig.queue:
            for t in mig.execute_migration(mig.queue.popleft()):
                if t > env.now:
                    yield env.timeout(t - env.now)

    def _ticker(self):
        policy = self.system.policy
        while True:
            yield self.env.timeout(1.0)
            if isinstance(policy, AutoPolicy):
                policy.tick(self.env.now)
            self._migration_step()

    def _sampler(self):
        interval = self.cfg.sample_interval
        while True:
            self._sample()
            yield self.env.timeout(interval)

    def _sample(self) -> None:
        store, storage, policy = self.store, self.system.storage, self.system.policy
        rec = {"time": self.env.now,
               "level_sizes": store.level_sizes(),
               "level_files": [len(lvl) for lvl in store.levels],
               "ssd_free_zones": storage.ssd_free_count(),
               "wal_zones": store.wal.zones_in_use,
               "immutables": len(store.immutables)}
        if isinstance(policy, WriteGuidedPlacement):
            led = policy.ledger().as_record()
            rec.update(tiering_level=led["t"], reserved=led["reserved"], allocated=led["A"],
                       demand=led["D"])
        if isinstance(policy, AutoPolicy):
            rec["max_level"] = policy.max_level
        if self.system.cache is not None:
            rec["cache_zones"] = len(self.system.cache.zones)
        self.samples.append(rec)

    # -- foreground client -----------------------------------------------

    def _write(self, key_id: int) -> None:
        ver = self.versions.get(key_id, 0) + 1
        self.versions[key_id] = ver
        self.store.put(make_key(key_id, self.cfg.key_size), make_value(key_id, ver, self.cfg.value_size))

    def _client(self, phase: str, ops):
        env, store, cfg = self.env, self.store, self.cfg
        rate = cfg.target_rate if phase == "run" else None
        start = env.now
        lat = self.latencies
        n = 0
        for op, key_id, arg in ops:
            if rate is not None:
                due = start + n / rate
                if due > env.now:
                    yield env.timeout(due - env.now)
            issue = env.now
            if op in WRITE_OPS:
                while store.write_stalled():
                    t0 = env.now
                    yield self._event
                    self.stall_time += env.now - t0
            if op == "read":
                store.get(make_key(key_id, cfg.key_size))
            elif op == "scan":
                store.scan(make_key(key_id, cfg.key_size), arg)
            elif op == "rmw":
                store.get(make_key(key_id, cfg.key_size))
                t_read = max(store.last_finish, env.now)
                self._write(key_id)
                store.last_finish = max(store.last_finish, t_read)
            else:
                self._write(key_id)
            if store.needs_flush():
                self._signal()
            finish = max(store.last_finish, env.now) + cfg.cpu_per_op
            yield env.timeout(finish - env.now)
            if phase == "run":
                lat[op].append(env.now - issue)
            n += 1
        self.phase_ops[phase] = n
        self.phase_times[phase] = (start, env.now)

    def _quiescent(self) -> bool:
        store = self.store
        return not (store.immutables or store.flush_running or store.compactions
                    or any(store.compaction_score(lvl) > 1.0
                           for lvl in range(store.config.level_count - 1)))

    def _settle(self):
        """Flush every MemTable and wait until no compaction is due."""
        store = self.store
        t0 = self.env.now
        store.seal_active()
        while not self._quiescent():
            if store.immutables and not store.flush_running:
                self._start(store.flush_job())
            self._signal()
            yield self._event
        self.phase_times["settle"] = (t0, self.env.now)
        self.phase_ops["settle"] = 0

    def _main(self):
        cfg = self.cfg
        load = (("load", i, 0) for i in range(cfg.record_count))
        yield from self._client("load", load)
        if cfg.settle:
            yield from self._settle()
        if cfg.ops:
            stream = OperationStream(cfg.workload_spec(), max(1, cfg.record_count))
            yield from self._client("run", stream)

    def run(self) -> MetricsReport:
        env = self.env
        if self.cfg.hint_trace:
            self.trace_file = open(self.cfg.hint_trace, "w")
            self.system.bus.trace = self.trace_file
        try:
            env.process(self._scheduler())
            env.process(self._ticker())
            env.process(self._sampler())
            main = env.process(self._main())
            env.run(until=main)
        finally:
            if self.trace_file is not None:
                self.trace_file.close()
                self.system.bus.trace = None
        self._sample()
        return self.report()

    # -- metrics ----------------------------------------------------------

    def report(self) -> MetricsReport:
        cfg, store, storage, sys_ = self.cfg, self.store, self.system.storage, self.system
        rep = MetricsReport(config=cfg.as_dict())
        summary = {"ops_total": sum(self.phase_ops.values()), "sim_time": self.env.now,
                   "stall_time": self.stall_time}
        for phase, (t0, t1) in self.phase_times.items():
            n = self.phase_ops[phase]
            summary[f"{phase}_ops"] = n
            summary[f"{phase}_time"] = t1 - t0
            summary[f"{phase}_throughput"] = n / (t1 - t0) if t1 > t0 else 0.0
        summary["throughput"] = summary.get("run_throughput", summary.get("load_throughput", 0.0))
        st = store.stats
        summary.update(flushes=st.flushes, compactions=st.compactions,
                       compaction_bytes_in=st.compaction_bytes_in,
                       compaction_bytes_out=st.compaction_bytes_out)
        for lvl, size in enumerate(store.level_sizes()):
            summary[f"max_L{lvl}_size"] = max((s["level_sizes"][lvl] for s in self.samples), default=0)
            summary[f"target_L{lvl}_size"] = store.config.target_size(lvl)
        rep.summary = summary
        rep.samples = self.samples

        written = storage.traffic.written
        ssd_total = sum(v for (d, _), v in written.items() if d == DeviceKind.SSD.value)
        cats = sorted({c for (_, c) in written})
        for c in cats:
            s = written.get((DeviceKind.SSD.value, c), 0)
            h = written.get((DeviceKind.HDD.value, c), 0)
            rep.traffic[c] = {"ssd_written": s, "hdd_written": h,
                              "ssd_read": storage.traffic.read.get((DeviceKind.SSD.value, c), 0),
                              "hdd_read": storage.traffic.read.get((DeviceKind.HDD.value, c), 0)}
            if ssd_total:
                rep.ssd_write_share[c] = 100.0 * s / ssd_total
            if s + h:
                rep.ssd_write_fraction[c] = 100.0 * s / (s + h)
        l01_ssd = sum(written.get((DeviceKind.SSD.value, c), 0) for c in ("L0", "L1"))
        l01_hdd = sum(written.get((DeviceKind.HDD.value, c), 0) for c in ("L0", "L1"))
        rs = st.reads
        device_reads = rs.ssd_reads + rs.hdd_reads + rs.ssd_cache_hits
        rep.reads = {"lookups": rs.lookups, "block_cache_hits": rs.block_cache_hits,
                     "ssd_cache_hits": rs.ssd_cache_hits, "ssd_reads": rs.ssd_reads,
                     "hdd_reads": rs.hdd_reads,
                     "hdd_read_pct": 100.0 * rs.hdd_reads / device_reads if device_reads else 0.0,
                     "l01_hdd_write_pct": 100.0 * l01_hdd / (l01_ssd + l01_hdd) if l01_ssd + l01_hdd else 0.0}
        rep.sst_reads = [{"sst_id": s.sst_id, "level": s.level, "device": s.location.device.value,
                          "read_count": s.read_count} for s in store.live_ssts()]
        rep.latency = {op: percentiles(v) for op, v in sorted(self.latencies.items())}
        all_lat = [x for v in self.latencies.values() for x in v]
        if all_lat:
            rep.latency["all"] = percentiles(all_lat)
        if sys_.cache is not None:
            cs = sys_.cache.stats
            rep.cache = {"hits": cs.hits, "misses": cs.misses, "admissions": cs.admissions,
                         "discards": cs.discards, "zone_evictions": cs.zone_evictions,
                         "invalidations": cs.invalidations, "entries": len(sys_.cache.mapping),
                         "zones": len(sys_.cache.zones)}
        if sys_.migrator is not None:
            rep.migrations = [j.as_record() for j in sys_.migrator.log]
        dev_written = storage.ssd.stats.bytes_written + storage.hdd.stats.bytes_written
        by_kind = {"wal": 0, "sst": 0, "cache": 0, "migration": 0}
        for (_, c), v in written.items():
            by_kind["sst" if c.startswith("L") else c] += v
        rep.conservation = {"device_bytes_written": dev_written, **by_kind,
                            "balanced": int(dev_written == sum(by_kind.values()))}
        rep.memory = memory_accounting(len(sys_.cache.mapping) if sys_.cache else 0, len(store.ssts))
        return rep


def run_experiment(cfg: ExperimentConfig, lsm=None) -> tuple[MetricsReport, Simulation]:
    sim = Simulation(cfg, lsm)
    return sim.run(), sim
