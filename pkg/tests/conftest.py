"""Shared builders: a tiny store driven by a manual clock."""

from __future__ import annotations

import pytest

from hybridzone.clock import ManualClock
from hybridzone.device import hdd_profile, ssd_profile
from hybridzone.harness.system import build_system
from hybridzone.lsm.store import LsmConfig

KiB = 1024

# Small enough that a few hundred puts exercise flushes and multi-level compaction.
TINY_LSM = dict(memtable_size=4 * KiB, memtable_entry_overhead=32, sst_size=3 * KiB,
                block_size=512, l0_target=6 * KiB, l1_target=6 * KiB, level_count=5,
                block_cache_bytes=1 * KiB, l0_stop_trigger=1000)


def tiny_system(policy: str = "hhzs", ssd_zones: int = 12, wal_cache_zones: int = 2,
                hdd_zones: int = 4096, migration_rate: float = 1 << 30, **lsm_over):
    lsm = LsmConfig(**{**TINY_LSM, **lsm_over})
    clock = ManualClock()
    return build_system(policy, clock, ssd_zones=ssd_zones, wal_cache_zones=wal_cache_zones,
                        migration_rate=migration_rate, lsm=lsm,
                        ssd=ssd_profile(ssd_zones, zone_capacity=3 * KiB + 256),
                        hdd=hdd_profile(hdd_zones, zone_capacity=1 * KiB))


@pytest.fixture
def tiny():
    return tiny_system


def install_sst(store, level, keys, value=b"v", created_at=None, read_count=0, device=None):
    """Write a hand-built SST holding ``keys`` straight into ``level``.

    ``device`` ("ssd" or "hdd") bypasses the placement policy.
    """
    from hybridzone.device import DeviceKind
    from hybridzone.lsm import SstMeta, build_sst
    from hybridzone.storage import Location, WriteCause

    data, contents = build_sst([(k, 1, value) for k in keys], store.config.block_size)
    if device is None:
        loc = store._place(level, WriteCause.COMPACTION, len(data))
    elif device == "ssd":
        loc = Location(DeviceKind.SSD, store.storage.alloc_ssd(level), len(data))
    else:
        loc = Location(DeviceKind.HDD, store.storage.alloc_hdd(len(data)), len(data))
    store.drain(store.storage.write_file(loc, data, f"L{level}"))
    meta = SstMeta(store.new_sst_id(), level, keys[0], keys[-1], len(data), loc,
                   store.clock.now if created_at is None else created_at, contents,
                   read_count=read_count)
    store._install(meta)
    return meta


def pytest_terminal_summary(terminalreporter):
    from acceptance_record import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
