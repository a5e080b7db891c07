"""Simulator of an LSM-tree key-value store on hybrid zoned SSD/HDD storage."""

from .baselines import AutoPolicy, BasicPolicy
from .clock import ManualClock
from .device import DeviceKind, DeviceProfile, ZonedDevice, hdd_profile, ssd_profile
from .hints import HintBus, ProtocolViolation
from .migration import Migrator, RateLimiter, priority_cmp
from .placement import LevelLedger, WriteGuidedPlacement, compute_tiering
from .ssd_cache import SsdCache
from .storage import HybridStorage, Location, StoreFull

__version__ = "0.1.0"
