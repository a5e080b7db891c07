"""Wire devices, storage, store and policy together for one experiment."""

from __future__ import annotations

from dataclasses import dataclass

from ..baselines import AutoPolicy, BasicPolicy
from ..device import ZonedDevice, hdd_profile, ssd_profile
from ..hints import HintBus
from ..lsm.store import LsmConfig, LsmStore
from ..migration import Migrator, RateLimiter
from ..placement import PlacementPolicy, WriteGuidedPlacement
from ..ssd_cache import SsdCache
from ..storage import HybridStorage

# policy name -> (migration, SSD cache)
_HINTED = {"p": (False, False), "pm": (True, False), "pmc": (True, True), "hhzs": (True, True)}


@dataclass
class System:
    storage: HybridStorage
    bus: HintBus
    store: LsmStore
    policy: PlacementPolicy
    migrator: Migrator | None = None
    cache: SsdCache | None = None
    limiter: RateLimiter | None = None


def build_system(policy: str, clock, *, ssd_zones: int = 20, wal_cache_zones: int = 2,
                 migration_rate: float = 4 * 1024 * 1024, hdd_zones: int = 8192,
                 lsm: LsmConfig | None = None, ssd=None, hdd=None) -> System:
    lsm = lsm or LsmConfig()
    ssd = ssd or ssd_profile(ssd_zones)
    hdd = hdd or hdd_profile(hdd_zones)
    basic = policy.startswith("b")
    storage = HybridStorage(ZonedDevice(ssd), ZonedDevice(hdd), clock,
                            reserved_zones=0 if basic else wal_cache_zones)
    if basic:
        pol: PlacementPolicy = BasicPolicy(storage, lsm.level_count, int(policy[1:]))
    elif policy == "auto":
        pol = AutoPolicy(storage, lsm.level_count)
    elif policy in _HINTED:
        pol = WriteGuidedPlacement(storage, lsm.level_count)
    else:
        raise ValueError(f"unknown policy {policy!r}")
    bus = HintBus()
    store = LsmStore(lsm, storage, pol, bus, clock)
    pol.attach(store)
    bus.subscribe(pol.on_hint)
    system = System(storage, bus, store, pol)
    migrate, cache = _HINTED.get(policy, (False, False))
    if migrate:
        system.limiter = RateLimiter(migration_rate)
        system.migrator = Migrator(store, pol, storage, system.limiter)
    if cache:
        system.cache = SsdCache(storage, store.ssts.get)
        store.ssd_cache = system.cache
        bus.subscribe(system.cache.on_hint)
    return system
