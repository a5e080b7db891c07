from __future__ import annotations

import struct

from sortedcontainers import SortedDict

from ..device import DeviceKind, ZoneFull
from ..storage import HybridStorage
from .sstable import decode_block, encode_entry, entry_size

_WAL_HEADER = struct.Struct("<IQ")  # record length, memtable id


class MemTable:
    def __init__(self, memtable_id: int, entry_overhead: int = 32):
        self.memtable_id = memtable_id
        self.entry_overhead = entry_overhead
        self.entries = SortedDict()  # key -> (seqno, value)
        self.size = 0

    def __len__(self):
        return len(self.entries)

    def put(self, key: bytes, seqno: int, value: bytes | None) -> None:
        old = self.entries.get(key)
        if old is not None:
            self.size -= entry_size(key, old[1]) + self.entry_overhead
        self.entries[key] = (seqno, value)
        self.size += entry_size(key, value) + self.entry_overhead

    def get(self, key: bytes):
        return self.entries.get(key)

    def iter_from(self, start: bytes | None):
        for key in self.entries.irange(minimum=start):
            seq, value = self.entries[key]
            yield key, seq, value


class WalSegment:
    __slots__ = ("device", "zone_id", "max_memtable_id", "used")

    def __init__(self, device: DeviceKind, zone_id: int):
        self.device = device
        self.zone_id = zone_id
        self.max_memtable_id = 0
        self.used = 0


class WriteAheadLog:
    """Append-only log spread over whole zones, reclaimed FIFO after flushes."""

    def __init__(self, storage: HybridStorage):
        self.storage = storage
        self.segments: list[WalSegment] = []
        self.bytes_appended = 0

    @property
    def zones_in_use(self) -> int:
        return len(self.segments)

    def footprint(self) -> int:
        return sum(s.used for s in self.segments)

    def append(self, memtable_id: int, key: bytes, seqno: int, value: bytes | None,
               at: float) -> float:
        body = encode_entry(key, seqno, value)
        record = _WAL_HEADER.pack(len(body), memtable_id) + body
        seg = self.segments[-1] if self.segments else None
        if seg is not None:
            cap = self.storage.zone_capacity(seg.device)
            if seg.used + len(record) > cap:
                self.storage.device(seg.device).finish(seg.zone_id)
                seg = None
        if seg is None:
            device, zone_id = self.storage.acquire_wal_zone()
            if len(record) > self.storage.zone_capacity(device):
                raise ZoneFull("WAL record larger than a zone")
            seg = WalSegment(device, zone_id)
            self.segments.append(seg)
        _, finish = self.storage.append(seg.device, seg.zone_id, record, "wal", at)
        seg.used += len(record)
        seg.max_memtable_id = max(seg.max_memtable_id, memtable_id)
        self.bytes_appended += len(record)
        return finish

    def release_flushed(self, flushed_memtable_id: int) -> int:
        """Reset every segment whose records all belong to flushed MemTables."""
        keep, freed = [], 0
        for seg in self.segments:
            if seg.max_memtable_id <= flushed_memtable_id:
                self.storage.release_zone(seg.device, seg.zone_id)
                freed += 1
            else:
                keep.append(seg)
        self.segments = keep
        return freed

    def replay(self, after_memtable_id: int = 0):
        """Yield (memtable_id, key, seqno, value) for records newer than a flushed id."""
        for seg in self.segments:
            dev = self.storage.device(seg.device)
            data = dev.read(seg.zone_id, 0, seg.used)
            pos = 0
            while pos < len(data):
                n, mid = _WAL_HEADER.unpack_from(data, pos)
                pos += _WAL_HEADER.size
                if mid > after_memtable_id:
                    (entry,) = decode_block(data[pos:pos + n])
                    yield (mid, *entry)
                pos += n
