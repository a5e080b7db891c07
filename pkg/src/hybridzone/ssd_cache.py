"""Application-hinted SSD cache for HDD-resident data blocks.

Blocks evicted from the in-memory block cache arrive as CacheEvict hints.
Blocks of HDD-resident SSTs are appended to the active cache zone, which is
taken from the reserved WAL/cache budget.  Zones are evicted whole, oldest
first.  Entries of deleted or relocated SSTs are dropped lazily at lookup and
eagerly when their zone is evicted.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

from .device import DeviceKind, IoKind
from .hints import CacheEvict, Hint
from .storage import HybridStorage

CACHE_ENTRY_BYTES = 48
PRIORITY_RECORD_BYTES = 32


class NoCacheZone(Exception):
    pass


def cache_memory_bound(cache_bytes: int, block_size: int) -> int:
    """Index memory of a cache of ``cache_bytes`` fully populated with blocks."""
    return (cache_bytes // block_size) * CACHE_ENTRY_BYTES


def priority_memory(data_bytes: int, zone_capacity: int) -> int:
    """Memory for the per-SST priority records of ``data_bytes`` of data."""
    return (data_bytes // zone_capacity) * PRIORITY_RECORD_BYTES


def memory_accounting(entry_count: int, sst_count: int) -> dict[str, int]:
    cache = entry_count * CACHE_ENTRY_BYTES
    prio = sst_count * PRIORITY_RECORD_BYTES
    return {"cache_index": cache, "priority_records": prio, "total": cache + prio}


@dataclass(eq=False)
class CacheEntry:
    sst_id: int
    block_offset: int
    zone_id: int
    zone_offset: int
    length: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.sst_id, self.block_offset)


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    admissions: int = 0
    discards: int = 0
    zone_evictions: int = 0
    invalidations: int = 0


class SsdCache:
    def __init__(self, storage: HybridStorage, sst_lookup: Callable[[int], object]):
        self.storage = storage
        self.sst_lookup = sst_lookup
        self.mapping: dict[tuple[int, int], CacheEntry] = {}
        self.queue: deque[CacheEntry] = deque()
        self.zones: deque[int] = deque()   # cache zones, oldest first
        self.active: int | None = None
        self.stats = CacheStats()
        storage.reclaim_reserved = self.reclaim

    def on_hint(self, hint: Hint) -> None:
        if isinstance(hint, CacheEvict):
            self.admit(hint)

    def _cacheable(self, sst_id: int) -> bool:
        sst = self.sst_lookup(sst_id)
        return sst is not None and sst.live and not sst.location.on_ssd

    def _open_zone(self) -> int | None:
        z = self.storage.take_reserved()
        if z is not None:
            self.zones.append(z)
            self.active = z
        return z

    def admit(self, hint: CacheEvict) -> bool:
        key = (hint.sst_id, hint.block_offset)
        payload = hint.block_payload
        cap = self.storage.zone_capacity(DeviceKind.SSD)
        if not self._cacheable(hint.sst_id) or key in self.mapping or len(payload) > cap:
            self.stats.discards += 1
            return False
        dev = self.storage.ssd
        if self.active is not None and dev.zone(self.active).write_pointer + len(payload) > cap:
            dev.finish(self.active)
            self.active = None
        if self.active is None and self._open_zone() is None:
            self.stats.discards += 1
            return False
        off, _ = self.storage.append(DeviceKind.SSD, self.active, payload, "cache",
                                     self.storage.clock.now)
        entry = CacheEntry(hint.sst_id, hint.block_offset, self.active, off, len(payload))
        self.mapping[key] = entry
        self.queue.append(entry)
        self.stats.admissions += 1
        return True

    def lookup(self, sst_id: int, block_offset: int, at: float) -> tuple[bytes, float] | None:
        key = (sst_id, block_offset)
        entry = self.mapping.get(key)
        if entry is not None and not self._cacheable(sst_id):
            del self.mapping[key]
            self.stats.invalidations += 1
            entry = None
        if entry is None:
            self.stats.misses += 1
            return None
        data = self.storage.ssd.read(entry.zone_id, entry.zone_offset, entry.length)
        finish = self.storage.ssd.submit(IoKind.RAND_READ, entry.length, at)
        self.storage.traffic.read_io(DeviceKind.SSD, "cache", entry.length)
        self.stats.hits += 1
        return data, finish

    def evict_oldest_zone(self) -> int:
        if not self.zones:
            raise NoCacheZone("no cache zone to evict")
        z = self.zones.popleft()
        if z == self.active:
            self.active = None
        while self.queue and self.queue[0].zone_id == z:
            entry = self.queue.popleft()
            if self.mapping.get(entry.key) is entry:
                del self.mapping[entry.key]
        self.storage.release_zone(DeviceKind.SSD, z)
        self.stats.zone_evictions += 1
        return z

    def reclaim(self) -> bool:
        """Hook for the storage layer: free one reserved zone if the cache holds any."""
        if not self.zones:
            return False
        self.evict_oldest_zone()
        return True

    def live_entries(self) -> list[CacheEntry]:
        return [e for e in self.queue if self.mapping.get(e.key) is e]

    def check_consistency(self) -> None:
        """Raise AssertionError unless mapping and queue are in bijection."""
        live = self.live_entries()
        assert len(live) == len(self.mapping), "mapping entry without queue entry"
        assert {id(e) for e in live} == {id(e) for e in self.mapping.values()}
        for e in self.queue:
            assert e.zone_id in self.zones, "queue entry in an evicted zone"

    def memory_accounting(self, sst_count: int = 0) -> dict[str, int]:
        return memory_accounting(len(self.mapping), sst_count)
