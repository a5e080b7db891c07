"""A minimal leveled LSM-tree on hybrid zoned storage.

Foreground operations (put/get/scan) run synchronously against the current
clock and record their completion time in ``last_finish``.  Background work
(flush, compaction) is exposed as generator jobs that yield the completion
time of each I/O chunk; a driver resumes them when that time is reached.  The
simulation runner drives them under simpy, tests drive them inline with
:meth:`LsmStore.drain`.
"""

from __future__ import annotations

import heapq
from bisect import bisect_left, bisect_right
from collections import deque
from dataclasses import dataclass, field
from itertools import count
from typing import Callable, Iterator

from ..device import IoKind
from ..hints import CacheEvict, CompactionBegin, CompactionEnd, CompactionOutput, Flush, HintBus
from ..storage import HybridStorage, Location, StoreFull, WriteCause
from .block_cache import BlockCache
from .memtable import MemTable, WriteAheadLog
from .sstable import SstMeta, decode_block, encode_entry, pack_ssts

KiB = 1024
MiB = 1024 * KiB


@dataclass
class LsmConfig:
    memtable_size: int = 512 * KiB
    memtable_entry_overhead: int = 32
    max_memtables: int = 4
    flush_trigger: int = 1
    sst_size: int = int(1011.2 * KiB)
    block_size: int = 4 * KiB
    bloom_bits_per_key: int = 10
    level_count: int = 7
    l0_target: int = 1 * MiB
    l1_target: int = 1 * MiB
    level_multiplier: int = 10
    block_cache_bytes: int = 8 * KiB
    l0_stop_trigger: int = 36
    background_tasks: int = 12

    def target_size(self, level: int) -> int:
        if level == 0:
            return self.l0_target
        return self.l1_target * self.level_multiplier ** (level - 1)


@dataclass
class CompactionPick:
    level: int
    upper: list[SstMeta]
    lower: list[SstMeta]
    lo: bytes
    hi: bytes
    compaction_id: int = 0

    @property
    def inputs(self) -> list[SstMeta]:
        return self.upper + self.lower

    @property
    def output_level(self) -> int:
        return self.level + 1


@dataclass
class ReadStats:
    lookups: int = 0          # data-block fetches by foreground reads
    block_cache_hits: int = 0
    ssd_cache_hits: int = 0
    ssd_reads: int = 0
    hdd_reads: int = 0


@dataclass
class StoreStats:
    puts: int = 0
    gets: int = 0
    scans: int = 0
    flushes: int = 0
    compactions: int = 0
    compaction_bytes_in: int = 0
    compaction_bytes_out: int = 0
    bloom_negatives: int = 0
    reads: ReadStats = field(default_factory=ReadStats)


def _newest_versions(items, drop_tombstones: bool):
    last = None
    for key, nseq, dead, data, start, end, h in items:
        if key == last:
            continue
        last = key
        if dead and drop_tombstones:
            continue
        yield key, -nseq, dead, data[start:end], h


class LsmStore:
    def __init__(self, config: LsmConfig, storage: HybridStorage, policy, bus: HintBus, clock):
        self.config = config
        self.storage = storage
        self.policy = policy
        self.bus = bus
        self.clock = clock
        self.levels: list[list[SstMeta]] = [[] for _ in range(config.level_count)]
        self._lower_keys: list[list[bytes]] = [[] for _ in range(config.level_count)]
        self.ssts: dict[int, SstMeta] = {}
        self._mem_ids = count(1)
        self.active = MemTable(next(self._mem_ids), config.memtable_entry_overhead)
        self.immutables: deque[MemTable] = deque()
        self.flushed_memtable_id = 0
        self.wal = WriteAheadLog(storage)
        self.block_cache = BlockCache(config.block_cache_bytes, self._on_block_evict)
        self.ssd_cache = None
        self.seqno = 0
        self._sst_ids = count(1)
        self._compaction_ids = count(1)
        self.flush_running = False
        self.compactions: dict[int, CompactionPick] = {}
        self.last_finish = 0.0
        self.stats = StoreStats()
        self.on_background_done: list[Callable[[str], None]] = []
        self.on_sst_deleted: list[Callable[[SstMeta], None]] = []

    # -- helpers ----------------------------------------------------------

    def new_sst_id(self) -> int:
        return next(self._sst_ids)

    def level_size(self, level: int) -> int:
        return sum(s.data_size for s in self.levels[level])

    def level_sizes(self) -> list[int]:
        return [self.level_size(i) for i in range(self.config.level_count)]

    def live_ssts(self) -> list[SstMeta]:
        return [self.ssts[k] for k in sorted(self.ssts)]

    def memtables(self) -> list[MemTable]:
        """All MemTables, newest first."""
        return [self.active, *reversed(self.immutables)]

    def _notify(self, what: str) -> None:
        for fn in self.on_background_done:
            fn(what)

    def _install(self, meta: SstMeta) -> None:
        self.ssts[meta.sst_id] = meta
        lvl = self.levels[meta.level]
        if meta.level == 0:
            lvl.append(meta)
            return
        keys = self._lower_keys[meta.level]
        i = bisect_left(keys, meta.min_key)
        lvl.insert(i, meta)
        keys.insert(i, meta.min_key)

    def _remove(self, meta: SstMeta) -> None:
        del self.ssts[meta.sst_id]
        lvl = self.levels[meta.level]
        i = lvl.index(meta)
        del lvl[i]
        if meta.level > 0:
            del self._lower_keys[meta.level][i]
        meta.live = False
        self.storage.release(meta.location)
        for fn in self.on_sst_deleted:
            fn(meta)

    def _place(self, level: int, cause: WriteCause, size: int) -> Location:
        loc = self.policy.select_target(level, cause, size)
        if loc is None:
            raise StoreFull(f"no empty zone for a {size}-byte L{level} SST")
        return loc

    # -- writes -----------------------------------------------------------

    def write_stalled(self) -> bool:
        cfg = self.config
        if len(self.levels[0]) >= cfg.l0_stop_trigger:
            return True
        return self.active.size >= cfg.memtable_size and len(self.immutables) >= cfg.max_memtables - 1

    def maybe_seal(self) -> bool:
        cfg = self.config
        if self.active.size >= cfg.memtable_size and len(self.immutables) < cfg.max_memtables - 1:
            self.immutables.append(self.active)
            self.active = MemTable(next(self._mem_ids), cfg.memtable_entry_overhead)
            return True
        return False

    def put(self, key: bytes, value: bytes | None) -> None:
        """Insert or update ``key``; ``value=None`` writes a tombstone."""
        self.stats.puts += 1
        self.seqno += 1
        self.last_finish = self.wal.append(self.active.memtable_id, key, self.seqno, value,
                                           self.clock.now)
        self.active.put(key, self.seqno, value)
        self.maybe_seal()

    def delete(self, key: bytes) -> None:
        self.put(key, None)

    def needs_flush(self) -> bool:
        return not self.flush_running and len(self.immutables) >= self.config.flush_trigger

    def seal_active(self) -> None:
        """Force the active MemTable to become immutable (if it holds data)."""
        if len(self.active):
            self.immutables.append(self.active)
            self.active = MemTable(next(self._mem_ids), self.config.memtable_entry_overhead)

    def flush_job(self) -> Iterator[float]:
        """Flush every immutable MemTable into L0 SSTs."""
        self.flush_running = True
        mems = list(self.immutables)
        merged = {}
        for mt in mems:
            for key, (seq, value) in mt.entries.items():
                merged[key] = (seq, value)
        cfg = self.config
        metas = []
        pending = pack_ssts(((key, seq, value is None, encode_entry(key, seq, value), None)
                             for key, (seq, value) in sorted(merged.items())),
                            cfg.sst_size, cfg.block_size, cfg.bloom_bits_per_key)
        for first, data, contents in pending:
            sst_id = self.new_sst_id()
            self.bus.publish(Flush(sst_id))
            loc = self._place(0, WriteCause.FLUSH, len(data))
            yield from self.storage.write_file(loc, data, "L0")
            metas.append(SstMeta(sst_id, 0, first, contents.index_keys[-1], len(data), loc,
                                 self.clock.now, contents))
        for meta in metas:
            self._install(meta)
        for _ in mems:
            self.immutables.popleft()
        if mems:
            self.flushed_memtable_id = mems[-1].memtable_id
            self.wal.release_flushed(self.flushed_memtable_id)
        self.stats.flushes += 1
        self.flush_running = False
        self.maybe_seal()
        self._notify("flush")

    # -- compaction -------------------------------------------------------

    def compaction_score(self, level: int) -> float:
        size = sum(s.data_size for s in self.levels[level] if not s.selected_for_compaction)
        return size / self.config.target_size(level)

    def _conflicts(self, out_level: int, lo: bytes, hi: bytes) -> bool:
        for pick in self.compactions.values():
            if pick.output_level == out_level and not (pick.hi < lo or pick.lo > hi):
                return True
        return False

    def _overlapping(self, level: int, lo: bytes, hi: bytes) -> list[SstMeta]:
        lvl = self.levels[level]
        if level == 0:
            return [s for s in lvl if s.overlaps(lo, hi)]
        i = max(0, bisect_right(self._lower_keys[level], lo) - 1)
        out = []
        while i < len(lvl) and lvl[i].min_key <= hi:
            if lvl[i].max_key >= lo:
                out.append(lvl[i])
            i += 1
        return out

    def _pick_at(self, level: int) -> CompactionPick | None:
        if level == 0:
            if any(p.level == 0 for p in self.compactions.values()) or not self.levels[0]:
                return None
            oldest = min(self.levels[0], key=lambda s: (s.created_at, s.sst_id))
            if oldest.selected_for_compaction:
                return None
            # Pull in every L0 SST overlapping the growing range, as RocksDB does;
            # a newer overlapping SST left behind would be shadowed by older data.
            upper = [oldest]
            lo, hi = oldest.min_key, oldest.max_key
            grew = True
            while grew:
                grew = False
                for s in self.levels[0]:
                    if s not in upper and s.overlaps(lo, hi):
                        upper.append(s)
                        lo, hi = min(lo, s.min_key), max(hi, s.max_key)
                        grew = True
            upper.sort(key=lambda s: (-s.created_at, -s.sst_id))
            lower = self._overlapping(1, lo, hi)
            if any(s.selected_for_compaction for s in upper + lower):
                return None
            lo = min([lo] + [s.min_key for s in lower])
            hi = max([hi] + [s.max_key for s in lower])
            return CompactionPick(0, upper, lower, lo, hi)
        candidates = sorted((s for s in self.levels[level] if not s.selected_for_compaction),
                            key=lambda s: (s.created_at, s.sst_id))
        for x in candidates:
            lower = self._overlapping(level + 1, x.min_key, x.max_key)
            if any(s.selected_for_compaction for s in lower):
                continue
            lo = min([x.min_key] + [s.min_key for s in lower])
            hi = max([x.max_key] + [s.max_key for s in lower])
            if self._conflicts(level + 1, lo, hi):
                continue
            return CompactionPick(level, [x], lower, lo, hi)
        return None

    def pick_compaction(self) -> CompactionPick | None:
        """Choose the next compaction, most overflowing level first."""
        if len(self.compactions) >= self.config.background_tasks:
            return None
        scored = []
        for level in range(self.config.level_count - 1):
            score = self.compaction_score(level)
            if score > 1.0:
                scored.append((-score, level))
        for _, level in sorted(scored):
            pick = self._pick_at(level)
            if pick is not None:
                pick.compaction_id = next(self._compaction_ids)
                for s in pick.inputs:
                    s.selected_for_compaction = True
                self.compactions[pick.compaction_id] = pick
                return pick
        return None

    def _is_bottommost(self, out_level: int, lo: bytes, hi: bytes) -> bool:
        return not any(self._overlapping(lvl, lo, hi)
                       for lvl in range(out_level + 1, self.config.level_count))

    def compaction_job(self, pick: CompactionPick) -> Iterator[float]:
        cfg = self.config
        out_level = pick.output_level
        selected = tuple(s.sst_id for s in pick.inputs)
        self.bus.publish(CompactionBegin(pick.compaction_id, selected, out_level))
        snapshots = []
        for s in pick.inputs:
            snapshots.append((s, self.storage.read_bytes(s.location, 0, s.data_size)))
            self.stats.compaction_bytes_in += s.data_size
        for s, _ in snapshots:
            yield from self.storage.charge_read(s.location, "compaction")
        # Sort every input entry by (key, -seqno) so the newest version comes first.
        items = []
        for s, data in snapshots:
            items.extend(s.contents.entry_spans(data))
        items.sort()
        drop_tombstones = self._is_bottommost(out_level, pick.lo, pick.hi)
        produced: list[SstMeta] = []
        outputs = pack_ssts(_newest_versions(items, drop_tombstones), cfg.sst_size,
                            cfg.block_size, cfg.bloom_bits_per_key)
        for first, data, contents in outputs:
            sst_id = self.new_sst_id()
            self.bus.publish(CompactionOutput(pick.compaction_id, sst_id, out_level))
            loc = self._place(out_level, WriteCause.COMPACTION, len(data))
            yield from self.storage.write_file(loc, data, f"L{out_level}")
            self.stats.compaction_bytes_out += len(data)
            produced.append(SstMeta(sst_id, out_level, first, contents.index_keys[-1], len(data),
                                    loc, self.clock.now, contents))
        for s in pick.inputs:
            self._remove(s)
        for meta in produced:
            self._install(meta)
        del self.compactions[pick.compaction_id]
        self.stats.compactions += 1
        self.bus.publish(CompactionEnd(pick.compaction_id, len(selected),
                                       tuple(m.sst_id for m in produced)))
        self._notify("compaction")

    # -- reads ------------------------------------------------------------

    def _on_block_evict(self, key, payload: bytes, is_data: bool) -> None:
        if is_data:
            sst_id, offset = key
            self.bus.publish(CacheEvict(sst_id, offset, payload))

    def _fetch_block(self, sst: SstMeta, index: int, cursor: float) -> tuple[list, float]:
        off, n = sst.contents.block_extent(index)
        ck = (sst.sst_id, off)
        rs = self.stats.reads
        rs.lookups += 1
        entries = self.block_cache.get(ck)
        if entries is not None:
            rs.block_cache_hits += 1
            return entries, cursor
        data = None
        if self.ssd_cache is not None and not sst.location.on_ssd:
            hit = self.ssd_cache.lookup(sst.sst_id, off, cursor)
            if hit is not None:
                data, cursor = hit
                rs.ssd_cache_hits += 1
        if data is None:
            data, cursor = self.storage.read(sst.location, off, n, IoKind.RAND_READ, "get", cursor)
            sst.read_count += 1
            if sst.location.on_ssd:
                rs.ssd_reads += 1
            else:
                rs.hdd_reads += 1
        entries = decode_block(data)
        self.block_cache.insert(ck, data, entries, is_data=True)
        return entries, cursor

    def _search_sst(self, sst: SstMeta, key: bytes, cursor: float):
        if not sst.contents.bloom.may_contain(key):
            self.stats.bloom_negatives += 1
            return None, cursor
        i = sst.contents.find_block(key)
        if i is None:
            return None, cursor
        entries, cursor = self._fetch_block(sst, i, cursor)
        j = bisect_left(entries, (key,))
        if j < len(entries) and entries[j][0] == key:
            return entries[j], cursor
        return None, cursor

    def _find_in_level(self, level: int, key: bytes) -> SstMeta | None:
        keys = self._lower_keys[level]
        i = bisect_right(keys, key) - 1
        if i >= 0:
            s = self.levels[level][i]
            if s.max_key >= key:
                return s
        return None

    def get(self, key: bytes) -> bytes | None:
        self.stats.gets += 1
        cursor = self.clock.now
        for mt in self.memtables():
            hit = mt.get(key)
            if hit is not None:
                self.last_finish = cursor
                return hit[1]
        found = None
        for sst in reversed(self.levels[0]):
            if sst.min_key <= key <= sst.max_key:
                found, cursor = self._search_sst(sst, key, cursor)
                if found is not None:
                    break
        if found is None:
            for level in range(1, self.config.level_count):
                sst = self._find_in_level(level, key)
                if sst is not None:
                    found, cursor = self._search_sst(sst, key, cursor)
                    if found is not None:
                        break
        self.last_finish = cursor
        return None if found is None else found[2]

    def _sst_iter(self, sst: SstMeta, start: bytes | None, state: list):
        first = 0 if start is None else sst.contents.find_block(start)
        if first is None:
            return
        for i in range(first, len(sst.contents.index_offsets)):
            entries, state[0] = self._fetch_block(sst, i, state[0])
            lo = 0 if start is None else bisect_left(entries, (start,))
            yield from entries[lo:]

    def _level_iter(self, level: int, start: bytes | None, state: list):
        ssts = self.levels[level]
        i = 0 if start is None else max(0, bisect_right(self._lower_keys[level], start) - 1)
        for sst in list(ssts[i:]):
            if start is not None and sst.max_key < start:
                continue
            yield from self._sst_iter(sst, start, state)

    def scan(self, start: bytes | None, n: int) -> list[tuple[bytes, bytes]]:
        """The ``n`` smallest live keys >= ``start`` with their latest values."""
        self.stats.scans += 1
        state = [self.clock.now]
        out = []
        if n > 0:
            sources = [mt.iter_from(start) for mt in self.memtables()]
            sources += [self._sst_iter(s, start, state) for s in reversed(self.levels[0])
                        if start is None or s.max_key >= start]
            sources += [self._level_iter(lvl, start, state)
                        for lvl in range(1, self.config.level_count) if self.levels[lvl]]
            last = None
            for key, seq, value in heapq.merge(*sources, key=lambda e: (e[0], -e[1])):
                if key == last:
                    continue
                last = key
                if value is not None:
                    out.append((key, value))
                    if len(out) >= n:
                        break
        self.last_finish = state[0]
        return out

    # -- synchronous driving ---------------------------------------------

    def drain(self, job: Iterator[float]) -> None:
        """Run a background job to completion, advancing a manual clock."""
        for t in job:
            if hasattr(self.clock, "advance_to"):
                self.clock.advance_to(t)

    def flush_all(self) -> None:
        self.seal_active()
        if self.immutables and not self.flush_running:
            self.drain(self.flush_job())

    def compact_once(self) -> bool:
        pick = self.pick_compaction()
        if pick is None:
            return False
        self.drain(self.compaction_job(pick))
        return True

    def run_background(self) -> None:
        while True:
            if self.needs_flush():
                self.drain(self.flush_job())
            elif not self.compact_once():
                break

    def replay_wal(self) -> list[tuple[bytes, int, bytes | None]]:
        """Entries of MemTables not yet flushed, in log order."""
        return [(key, seq, value) for _, key, seq, value
                in self.wal.replay(self.flushed_memtable_id)]

    def recover_memtables(self) -> None:
        """Rebuild in-memory state for unflushed writes from the WAL alone."""
        entries = self.replay_wal()
        self.immutables.clear()
        self.active = MemTable(next(self._mem_ids), self.config.memtable_entry_overhead)
        for key, seq, value in entries:
            self.active.put(key, seq, value)
            self.seqno = max(self.seqno, seq)
