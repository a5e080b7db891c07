"""Write-guided data placement.

Compaction and flush hints keep a per-level storage demand (SSTs still to be
written by in-flight operations).  Together with the per-level count of SSD
zones already allocated, the demand decides the tiering level: levels below it
go to the SSD, levels above it to the HDD, and the tiering level itself gets
whatever SSD zones remain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .device import DeviceKind
from .hints import CompactionBegin, CompactionEnd, CompactionOutput, Flush, Hint
from .storage import HybridStorage, Location, WriteCause

# A placement decision is the target location of the SST about to be written.
PlacementDecision = Location


@dataclass
class LevelLedger:
    allocated: list[int]
    demand: list[int]
    c_ssd: int
    wal_zones_in_use: int = 0

    def __post_init__(self):
        if len(self.allocated) != len(self.demand):
            raise ValueError("allocated and demand must cover the same levels")

    def as_record(self) -> dict:
        t, reserved = compute_tiering(self.allocated, self.demand, self.c_ssd)
        return {"A": list(self.allocated), "D": list(self.demand), "C_ssd": self.c_ssd,
                "wal_zones": self.wal_zones_in_use, "t": t, "reserved": reserved}


def compute_tiering(allocated, demand, c_ssd: int) -> tuple[int, int]:
    """Return ``(t, reserved)`` for the given per-level allocations and demands.

    ``t`` is the lowest level whose cumulative allocation plus demand reaches
    ``c_ssd``; ``reserved`` is the number of SSD zones left for level ``t``
    (never negative).  When every level fits, ``t == len(allocated)`` and
    ``reserved`` is the spare SSD capacity.
    """
    acc = 0
    for i, (a, d) in enumerate(zip(allocated, demand)):
        before = acc
        acc += a + d
        if acc >= c_ssd:
            return i, max(0, c_ssd - before)
    return len(allocated), max(0, c_ssd - acc)


class PlacementPolicy:
    """Common surface of every placement policy."""

    name = "base"
    reserves_wal = True

    def __init__(self, storage: HybridStorage, level_count: int):
        self.storage = storage
        self.level_count = level_count
        self.store = None

    def attach(self, store) -> None:
        self.store = store

    def on_hint(self, hint: Hint) -> None:
        pass

    def _ssd(self, level: int, size: int) -> Location | None:
        zones = self.storage.alloc_ssd(level)
        return None if zones is None else Location(DeviceKind.SSD, zones, size)

    def _hdd(self, size: int) -> Location | None:
        zones = self.storage.alloc_hdd(size)
        return None if zones is None else Location(DeviceKind.HDD, zones, size)

    def _ssd_or_hdd(self, level: int, size: int) -> Location | None:
        if size <= self.storage.zone_capacity(DeviceKind.SSD):
            loc = self._ssd(level, size)
            if loc is not None:
                return loc
        return self._hdd(size)

    def select_target(self, level: int, cause: WriteCause, size: int) -> PlacementDecision | None:
        raise NotImplementedError


class WriteGuidedPlacement(PlacementPolicy):
    name = "p"

    def __init__(self, storage: HybridStorage, level_count: int,
                 wal_zones: Callable[[], int] | None = None):
        super().__init__(storage, level_count)
        self._wal_zones = wal_zones
        # compaction id -> [output level, SSTs still to be written]
        self._compactions: dict[int, list[int]] = {}
        self.flush_intents: list[int] = []
        self.grants = {"ssd": 0, "hdd": 0}

    def attach(self, store) -> None:
        super().attach(store)
        if self._wal_zones is None:
            self._wal_zones = lambda: store.wal.zones_in_use

    @property
    def c_ssd(self) -> int:
        return self.storage.sst_pool_size

    def on_hint(self, hint: Hint) -> None:
        if isinstance(hint, CompactionBegin):
            self._compactions[hint.compaction_id] = [hint.output_level, len(hint.selected_sst_ids)]
        elif isinstance(hint, CompactionOutput):
            self._compactions[hint.compaction_id][1] -= 1
        elif isinstance(hint, CompactionEnd):
            # Whatever was selected but never produced leaves the demand here.
            del self._compactions[hint.compaction_id]
        elif isinstance(hint, Flush):
            self.flush_intents.append(hint.sst_id)

    def demand(self) -> list[int]:
        d = [0] * self.level_count
        d[0] = self._wal_zones() if self._wal_zones is not None else 0
        for level, remaining in self._compactions.values():
            if remaining > 0:
                d[level] += remaining
        return d

    def ledger(self) -> LevelLedger:
        d = self.demand()
        return LevelLedger(self.storage.allocated_per_level(self.level_count), d, self.c_ssd, d[0])

    def tiering(self) -> tuple[int, int]:
        led = self.ledger()
        return compute_tiering(led.allocated, led.demand, led.c_ssd)

    def wants_ssd(self, level: int, cause: WriteCause) -> bool:
        if cause is WriteCause.FLUSH:
            return True
        led = self.ledger()
        t, reserved = compute_tiering(led.allocated, led.demand, led.c_ssd)
        if level < t:
            return True
        # SSD zones already granted to L_t count against its reservation.
        return level == t and led.allocated[t] < reserved

    def select_target(self, level: int, cause: WriteCause, size: int) -> PlacementDecision | None:
        if cause is WriteCause.FLUSH and self.flush_intents:
            self.flush_intents.pop(0)
        loc = None
        if self.wants_ssd(level, cause) and size <= self.storage.zone_capacity(DeviceKind.SSD):
            loc = self._ssd(level, size)
        if loc is None:
            loc = self._hdd(size)
            if loc is not None:
                self.grants["hdd"] += 1
        else:
            self.grants["ssd"] += 1
        return loc
