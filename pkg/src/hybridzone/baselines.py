"""Comparison placement policies: the basic schemes B_h and AUTO."""

from __future__ import annotations

from .placement import PlacementDecision, PlacementPolicy
from .storage import HybridStorage, WriteCause

LOW_UTIL = 0.40
HIGH_UTIL = 0.65
SPACE_PIN = 0.133
SPACE_STOP = 0.08


class BasicPolicy(PlacementPolicy):
    """Levels below ``h`` go to the SSD while it has an empty zone; the rest to the HDD.

    The WAL competes with SSTs for the same SSD zones and nothing is migrated.
    """

    reserves_wal = False

    def __init__(self, storage: HybridStorage, level_count: int, h: int):
        if not 1 <= h <= level_count:
            raise ValueError(f"h must be in [1, {level_count}], got {h}")
        super().__init__(storage, level_count)
        self.h = h
        self.name = f"b{h}"

    def select_target(self, level: int, cause: WriteCause, size: int) -> PlacementDecision | None:
        if level < self.h:
            return self._ssd_or_hdd(level, size)
        return self._hdd(size)


class AutoPolicy(PlacementPolicy):
    """Levels up to ``max_level`` go to the SSD; ``max_level`` follows SSD write load."""

    name = "auto"

    def __init__(self, storage: HybridStorage, level_count: int, max_level: int = 1):
        super().__init__(storage, level_count)
        self.max_level = max_level
        self.seq_write_rate = storage.ssd.profile.seq_write_rate
        self._last_bytes = 0
        self._last_time = 0.0
        self.history: list[tuple[float, int]] = []

    def remaining_space(self) -> float:
        return self.storage.ssd_free_count() / self.storage.ssd.profile.zone_count

    def auto_tune(self, write_bps: float, remaining: float) -> int:
        if remaining < SPACE_STOP:
            self.max_level = -1
        elif remaining < SPACE_PIN:
            self.max_level = 1
        else:
            if self.max_level < 0:
                self.max_level = 1
            util = write_bps / self.seq_write_rate
            if util < LOW_UTIL:
                self.max_level = min(self.level_count, self.max_level + 1)
            elif util > HIGH_UTIL:
                self.max_level = max(0, self.max_level - 1)
        return self.max_level

    def tick(self, now: float) -> int:
        """Tune from the SSD write throughput since the previous tick."""
        written = self.storage.ssd.stats.bytes_written
        span = now - self._last_time
        if span > 0:
            self.auto_tune((written - self._last_bytes) / span, self.remaining_space())
            self.history.append((now, self.max_level))
        self._last_bytes = written
        self._last_time = now
        return self.max_level

    def select_target(self, level: int, cause: WriteCause, size: int) -> PlacementDecision | None:
        if level <= self.max_level:
            return self._ssd_or_hdd(level, size)
        return self._hdd(size)
