"""Hybrid zoned storage: one SSD and one HDD, zone pools and file I/O.

Files (SSTs, migration copies) are laid out over whole zones: one SSD zone,
or as many HDD zones as the file needs.  The lowest ``reserved_zones`` SSD
zones form the WAL/cache budget when reservation is enabled; the remaining SSD
zones are the SST pool whose per-level allocation feeds the placement ledger.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterator

from sortedcontainers import SortedList

from .device import DeviceKind, IoKind, ZonedDevice

WAL_LEVEL = -1


class WriteCause(str, enum.Enum):
    FLUSH = "flush"
    COMPACTION = "compaction"


class StoreFull(Exception):
    """No empty zone is left for an unavoidable write."""


@dataclass(frozen=True)
class Location:
    device: DeviceKind
    zones: tuple[int, ...]
    size: int

    @property
    def on_ssd(self) -> bool:
        return self.device is DeviceKind.SSD


class TrafficStats:
    def __init__(self):
        self.written = defaultdict(int)   # (device, category) -> bytes
        self.read = defaultdict(int)      # (device, category) -> bytes
        self.read_ops = defaultdict(int)  # (device, category) -> requests

    def write(self, device: DeviceKind, category: str, nbytes: int) -> None:
        self.written[(device.value, category)] += nbytes

    def read_io(self, device: DeviceKind, category: str, nbytes: int) -> None:
        self.read[(device.value, category)] += nbytes
        self.read_ops[(device.value, category)] += 1

    def written_total(self, device: str | None = None, category: str | None = None) -> int:
        return sum(v for (d, c), v in self.written.items()
                   if (device is None or d == device) and (category is None or c == category))


class HybridStorage:
    def __init__(self, ssd: ZonedDevice, hdd: ZonedDevice, clock,
                 reserved_zones: int = 0, bg_chunk: int = 256 * 1024):
        if reserved_zones >= ssd.profile.zone_count:
            raise ValueError("reserved zones must leave SSD zones for SSTs")
        self.ssd = ssd
        self.hdd = hdd
        self.clock = clock
        self.bg_chunk = bg_chunk
        self.reserved_zones = reserved_zones
        self.reserved_ids = tuple(range(reserved_zones))
        self._reserved_free = SortedList(self.reserved_ids)
        self._ssd_free = SortedList(range(reserved_zones, ssd.profile.zone_count))
        self._hdd_free = SortedList(range(hdd.profile.zone_count))
        # SST-pool SSD zone -> level it is allocated to (WAL_LEVEL for WAL zones).
        self.ssd_zone_level: dict[int, int] = {}
        self.traffic = TrafficStats()
        # Called when the reserved pool is exhausted; frees one reserved zone if it can.
        self.reclaim_reserved: Callable[[], bool] | None = None

    def device(self, kind: DeviceKind) -> ZonedDevice:
        return self.ssd if kind is DeviceKind.SSD else self.hdd

    @property
    def sst_pool_size(self) -> int:
        return self.ssd.profile.zone_count - self.reserved_zones

    def ssd_free_count(self) -> int:
        return len(self._ssd_free)

    def hdd_free_count(self) -> int:
        return len(self._hdd_free)

    def reserved_free_count(self) -> int:
        return len(self._reserved_free)

    def allocated_per_level(self, level_count: int) -> list[int]:
        counts = [0] * level_count
        for lvl in self.ssd_zone_level.values():
            if 0 <= lvl < level_count:
                counts[lvl] += 1
        return counts

    def hdd_zones_for(self, nbytes: int) -> int:
        cap = self.hdd.profile.zone_capacity
        return max(1, -(-nbytes // cap))

    # -- allocation -------------------------------------------------------

    def alloc_ssd(self, level: int) -> tuple[int, ...] | None:
        if not self._ssd_free:
            return None
        z = self._ssd_free.pop(0)
        self.ssd_zone_level[z] = level
        return (z,)

    def alloc_hdd(self, nbytes: int) -> tuple[int, ...] | None:
        n = self.hdd_zones_for(nbytes)
        if len(self._hdd_free) < n:
            return None
        return tuple(self._hdd_free.pop(0) for _ in range(n))

    def take_reserved(self) -> int | None:
        if not self._reserved_free and self.reclaim_reserved is not None:
            self.reclaim_reserved()
        if not self._reserved_free:
            return None
        return self._reserved_free.pop(0)

    def is_reserved(self, zone_id: int) -> bool:
        return zone_id < self.reserved_zones

    def release_zone(self, kind: DeviceKind, zone_id: int) -> None:
        dev = self.device(kind)
        dev.reset(zone_id)
        if kind is DeviceKind.HDD:
            self._hdd_free.add(zone_id)
        elif self.is_reserved(zone_id):
            self._reserved_free.add(zone_id)
        else:
            self.ssd_zone_level.pop(zone_id, None)
            self._ssd_free.add(zone_id)

    def release(self, loc: Location) -> None:
        for z in loc.zones:
            self.release_zone(loc.device, z)

    def acquire_wal_zone(self) -> tuple[DeviceKind, int]:
        """Pick a zone for the next WAL segment.

        With reservation the WAL lives in the reserved budget, reclaiming a
        cache zone first when needed, and spills to the HDD only beyond the
        budget.  Without reservation it competes for the SST pool.
        """
        if self.reserved_zones:
            z = self.take_reserved()
            if z is not None:
                return DeviceKind.SSD, z
        else:
            zones = self.alloc_ssd(WAL_LEVEL)
            if zones is not None:
                return DeviceKind.SSD, zones[0]
        if not self._hdd_free:
            raise StoreFull("no empty zone for the WAL")
        return DeviceKind.HDD, self._hdd_free.pop(0)

    # -- data path --------------------------------------------------------

    def zone_capacity(self, kind: DeviceKind) -> int:
        return self.device(kind).profile.zone_capacity

    def _pieces(self, loc: Location, offset: int, length: int):
        cap = self.zone_capacity(loc.device)
        end = offset + length
        while offset < end:
            idx, zoff = divmod(offset, cap)
            n = min(cap - zoff, end - offset)
            yield loc.zones[idx], zoff, n
            offset += n

    def read_bytes(self, loc: Location, offset: int, length: int) -> bytes:
        """Fetch file bytes without charging any device time."""
        dev = self.device(loc.device)
        parts = [dev.read(z, zoff, n) for z, zoff, n in self._pieces(loc, offset, length)]
        return parts[0] if len(parts) == 1 else b"".join(parts)

    def read(self, loc: Location, offset: int, length: int, kind: IoKind,
             category: str, at: float) -> tuple[bytes, float]:
        data = self.read_bytes(loc, offset, length)
        finish = self.device(loc.device).submit(kind, length, at)
        self.traffic.read_io(loc.device, category, length)
        return data, finish

    def append(self, kind: DeviceKind, zone_id: int, payload: bytes, category: str,
               at: float) -> tuple[int, float]:
        dev = self.device(kind)
        off = dev.append(zone_id, payload)
        finish = dev.submit(IoKind.SEQ_WRITE, len(payload), at)
        self.traffic.write(kind, category, len(payload))
        return off, finish

    def write_file(self, loc: Location, data: bytes, category: str) -> Iterator[float]:
        """Append ``data`` over the zones of ``loc`` in background-sized chunks.

        Yields the completion time of each chunk; the caller resumes after it.
        """
        dev = self.device(loc.device)
        cap = dev.profile.zone_capacity
        pos = 0
        for z in loc.zones:
            zone_end = min(pos + cap, len(data))
            while pos < zone_end:
                n = min(self.bg_chunk, zone_end - pos)
                dev.append(z, data[pos:pos + n])
                self.traffic.write(loc.device, category, n)
                yield dev.submit(IoKind.SEQ_WRITE, n, self.clock.now)
                pos += n

    def charge_read(self, loc: Location, category: str) -> Iterator[float]:
        """Charge a sequential read of the whole file in background-sized chunks.

        Callers snapshot the bytes with :meth:`read_bytes` first, so a
        concurrent relocation of the file cannot invalidate the copy.
        """
        dev = self.device(loc.device)
        pos = 0
        while pos < loc.size:
            n = min(self.bg_chunk, loc.size - pos)
            self.traffic.read_io(loc.device, category, n)
            pos += n
            yield dev.submit(IoKind.SEQ_READ, n, self.clock.now)
