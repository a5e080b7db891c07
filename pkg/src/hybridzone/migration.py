"""Workload-aware background migration between the SSD and the HDD.

Capacity migration moves the lowest-priority SST off the SSD whenever the
tiering level's reservation is exceeded or an SSD SST sits above the tiering
level.  Popularity migration pulls the highest-priority HDD SST onto the SSD
(or swaps it with the lowest-priority SSD SST) when the HDD read load exceeds
half of its random-read IOPS.  Copies are paced by a rate limiter.
"""

from __future__ import annotations

import enum
import functools
from collections import deque
from dataclasses import asdict, dataclass
from typing import Iterator

from .device import DeviceKind, IoKind
from .lsm.sstable import SstMeta
from .storage import HybridStorage, Location

MiB = 1024 * 1024
AGE_FLOOR = 1.0


def read_rate(sst: SstMeta, now: float) -> float:
    return sst.read_rate(now, AGE_FLOOR)


def priority_key(sst: SstMeta, now: float) -> tuple:
    """Sort key: ascending order is descending priority."""
    return (sst.level, -read_rate(sst, now), sst.sst_id)


def priority_cmp(x: SstMeta, y: SstMeta, now: float) -> int:
    """1 if ``x`` has higher priority than ``y``, -1 if lower, 0 if equal.

    Equality ignores the sst_id tie-break used by :func:`by_priority`.
    """
    if x.level != y.level:
        return 1 if x.level < y.level else -1
    rx, ry = read_rate(x, now), read_rate(y, now)
    if rx == ry:
        return 0
    return 1 if rx > ry else -1


def by_priority(ssts, now: float) -> list[SstMeta]:
    """Highest priority first; ties go to the smaller sst_id."""
    return sorted(ssts, key=lambda s: priority_key(s, now))


class RateLimiter:
    """Paces chunked copies so that ``limit`` bytes/s is not exceeded.

    A chunk of ``n`` bytes that starts at ``s`` pushes the earliest start of
    the next chunk to ``s + n / limit``.  Bytes started in any window of
    length ``d`` are therefore at most ``limit * d`` plus one chunk.
    """

    def __init__(self, limit: float = 4 * MiB):
        if limit <= 0:
            raise ValueError("rate limit must be positive")
        self.limit = float(limit)
        self.next_free = 0.0
        self.history: list[tuple[float, int]] = []  # (start, bytes)

    def reserve(self, nbytes: int, now: float) -> float:
        start = max(now, self.next_free)
        self.next_free = start + nbytes / self.limit
        self.history.append((start, nbytes))
        return start


def max_window_bytes(history, window: float) -> int:
    """Largest byte count whose chunks all start within some ``window``."""
    best = 0
    j = 0
    acc = 0
    for i, (t, n) in enumerate(history):
        acc += n
        while history[j][0] < t - window:
            acc -= history[j][1]
            j += 1
        best = max(best, acc)
    return best


class Direction(str, enum.Enum):
    TO_HDD = "ssd->hdd"
    TO_SSD = "hdd->ssd"


class Aborted(Exception):
    pass


@dataclass
class MigrationJob:
    job_id: int
    sst_id: int
    direction: Direction
    reason: str
    bytes: int = 0
    start: float | None = None
    end: float | None = None
    status: str = "queued"

    def as_record(self) -> dict:
        rec = asdict(self)
        rec["direction"] = self.direction.value
        return rec


class Migrator:
    def __init__(self, store, placement, storage: HybridStorage, limiter: RateLimiter,
                 chunk: int = 256 * 1024):
        self.store = store
        self.placement = placement
        self.storage = storage
        self.limiter = limiter
        self.chunk = chunk
        self.hdd_iops = storage.hdd.profile.rand_read_iops
        self.queue: deque[MigrationJob] = deque()
        self.running: MigrationJob | None = None
        self.log: list[MigrationJob] = []
        self._next_id = 1

    @property
    def idle(self) -> bool:
        return self.running is None and not self.queue

    def _job(self, sst: SstMeta, direction: Direction, reason: str) -> MigrationJob:
        job = MigrationJob(self._next_id, sst.sst_id, direction, reason, sst.data_size)
        self._next_id += 1
        return job

    @staticmethod
    def eligible(sst: SstMeta) -> bool:
        return sst.live and not sst.selected_for_compaction and not sst.migrating

    def _resident(self, on_ssd: bool) -> list[SstMeta]:
        return [s for s in self.store.ssts.values() if s.location.on_ssd == on_ssd]

    def hdd_read_rate(self, now: float) -> float:
        return sum(read_rate(s, now) for s in self._resident(False))

    # -- triggers ---------------------------------------------------------

    def capacity_migration_step(self, now: float) -> list[MigrationJob]:
        t, reserved = self.placement.tiering()
        ssd = self._resident(True)
        at_t = sum(1 for s in ssd if s.level == t)
        if not (at_t > reserved or any(s.level > t for s in ssd)):
            return []
        candidates = by_priority((s for s in ssd if self.eligible(s)), now)
        if not candidates:
            return []
        return [self._job(candidates[-1], Direction.TO_HDD, "capacity")]

    def popularity_migration_step(self, now: float) -> list[MigrationJob]:
        hdd = self._resident(False)
        if sum(read_rate(s, now) for s in hdd) <= 0.5 * self.hdd_iops:
            return []
        candidates = by_priority((s for s in hdd if self.eligible(s)), now)
        if not candidates:
            return []
        hot = candidates[0]
        t, _ = self.placement.tiering()
        demand = self.placement.demand()
        free = self.storage.ssd_free_count()
        if free > sum(demand[:t]):
            return [self._job(hot, Direction.TO_SSD, "popularity")]
        victims = by_priority((s for s in self._resident(True) if self.eligible(s)), now)
        if not victims or priority_cmp(hot, victims[-1], now) <= 0:
            return []
        cold = victims[-1]
        into = self._job(hot, Direction.TO_SSD, "swap")
        out = self._job(cold, Direction.TO_HDD, "swap")
        # With a free staging zone the hot SST goes in first.
        return [into, out] if free > 0 else [out, into]

    def step(self, now: float) -> list[MigrationJob]:
        """Run both triggers when no migration is pending; queue what they produce."""
        if not self.idle:
            return []
        jobs = self.capacity_migration_step(now) or self.popularity_migration_step(now)
        self.queue.extend(jobs)
        return jobs

    # -- execution --------------------------------------------------------

    def _allocate(self, sst: SstMeta, direction: Direction) -> Location | None:
        if direction is Direction.TO_SSD:
            if sst.data_size > self.storage.zone_capacity(DeviceKind.SSD):
                return None
            zones = self.storage.alloc_ssd(sst.level)
            return None if zones is None else Location(DeviceKind.SSD, zones, sst.data_size)
        zones = self.storage.alloc_hdd(sst.data_size)
        return None if zones is None else Location(DeviceKind.HDD, zones, sst.data_size)

    def _finish(self, job: MigrationJob, status: str, now: float) -> None:
        job.status = status
        job.end = now
        self.log.append(job)
        self.running = None

    def execute_migration(self, job: MigrationJob) -> Iterator[float]:
        """Copy one SST at the limiter's pace, then switch its location."""
        clock = self.storage.clock
        self.running = job
        job.start = clock.now
        sst = self.store.ssts.get(job.sst_id)
        want_ssd = job.direction is Direction.TO_SSD
        if sst is None or not self.eligible(sst) or sst.location.on_ssd == want_ssd:
            self._finish(job, "skipped", clock.now)
            return
        dest = self._allocate(sst, job.direction)
        if dest is None:
            self._finish(job, "no-space", clock.now)
            return
        sst.migrating = True
        src = sst.location
        data = self.storage.read_bytes(src, 0, sst.data_size)
        src_dev = self.storage.device(src.device)
        dst_dev = self.storage.device(dest.device)
        cap = dst_dev.profile.zone_capacity
        pos = 0
        while pos < len(data):
            zone = dest.zones[pos // cap]
            n = min(self.chunk, len(data) - pos, cap - pos % cap)
            start = self.limiter.reserve(n, clock.now)
            if start > clock.now:
                yield start
            if not sst.live:
                break
            dst_dev.append(zone, data[pos:pos + n])
            self.storage.traffic.read_io(src.device, "migration", n)
            self.storage.traffic.write(dest.device, "migration", n)
            done_r = src_dev.submit(IoKind.SEQ_READ, n, clock.now)
            done_w = dst_dev.submit(IoKind.SEQ_WRITE, n, clock.now)
            pos += n
            yield max(done_r, done_w)
        sst.migrating = False
        if not sst.live:
            self.storage.release(dest)
            self._finish(job, "aborted", clock.now)
            return
        sst.location = dest
        self.storage.release(src)
        self._finish(job, "done", clock.now)

    def run_queued(self) -> None:
        """Drain every queued job inline (manual clock only)."""
        while self.queue:
            self.store.drain(self.execute_migration(self.queue.popleft()))
