"""Zoned block device emulation.

A :class:`ZonedDevice` holds a fixed number of append-only zones, each with a
write pointer, and a single service channel whose ``busy_until`` timestamp
serializes every request issued to the device.  Timing comes from
:func:`service_time`, which turns the sequential/random throughput figures of
a :class:`DeviceProfile` into per-request durations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

KiB = 1024
MiB = 1024 * 1024


class DeviceKind(str, enum.Enum):
    SSD = "SSD"
    HDD = "HDD"


class ZoneCondition(str, enum.Enum):
    EMPTY = "EMPTY"
    OPEN = "OPEN"
    FULL = "FULL"


class IoKind(str, enum.Enum):
    SEQ_READ = "SEQ_READ"
    SEQ_WRITE = "SEQ_WRITE"
    RAND_READ = "RAND_READ"


class ZoneError(Exception):
    pass


class ZoneFull(ZoneError):
    """The append does not fit in the remaining zone capacity."""


class ZoneNotWritable(ZoneError):
    """The zone is FULL and accepts no further appends."""


class ReadBeyondWritePointer(ZoneError):
    pass


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceProfile:
    kind: DeviceKind
    zone_capacity: int
    zone_count: int
    seq_read_rate: float
    seq_write_rate: float
    rand_read_iops: float
    block_size: int = 4 * KiB

    def __post_init__(self):
        if self.zone_capacity <= 0 or self.zone_count <= 0:
            raise ProfileError("zone_capacity and zone_count must be positive")
        if min(self.seq_read_rate, self.seq_write_rate, self.rand_read_iops) <= 0:
            raise ProfileError("device rates must be strictly positive")
        if self.block_size <= 0:
            raise ProfileError("block_size must be positive")

    @property
    def capacity(self) -> int:
        return self.zone_capacity * self.zone_count

    def with_zone_count(self, zone_count: int) -> "DeviceProfile":
        return DeviceProfile(self.kind, self.zone_capacity, zone_count,
                             self.seq_read_rate, self.seq_write_rate,
                             self.rand_read_iops, self.block_size)


# Measured rates of the ZN540 ZNS SSD and the ST14000NM0007 HM-SMR HDD.
SSD_SEQ_READ_MIBS = 1039.6
SSD_SEQ_WRITE_MIBS = 1002.8
SSD_RAND_READ_IOPS = 16928.3
HDD_SEQ_READ_MIBS = 210.0
HDD_SEQ_WRITE_MIBS = 210.0
HDD_RAND_READ_IOPS = 115.0


def ssd_profile(zone_count: int = 20, zone_capacity: int = 1077 * KiB) -> DeviceProfile:
    """Desk-scale ZNS SSD: 1,077 KiB zones, full-speed rates."""
    return DeviceProfile(DeviceKind.SSD, zone_capacity, zone_count,
                         SSD_SEQ_READ_MIBS * MiB, SSD_SEQ_WRITE_MIBS * MiB,
                         SSD_RAND_READ_IOPS)


def hdd_profile(zone_count: int = 8192, zone_capacity: int = 256 * KiB) -> DeviceProfile:
    """Desk-scale HM-SMR HDD: 256 KiB zones, full-speed rates."""
    return DeviceProfile(DeviceKind.HDD, zone_capacity, zone_count,
                         HDD_SEQ_READ_MIBS * MiB, HDD_SEQ_WRITE_MIBS * MiB,
                         HDD_RAND_READ_IOPS)


_PROFILE_KEYS = {
    "kind": str,
    "zone_capacity_bytes": int,
    "zone_count": int,
    "seq_read_Bps": float,
    "seq_write_Bps": float,
    "rand_read_iops": float,
    "block_size_bytes": int,
}


def profile_from_mapping(data: dict) -> DeviceProfile:
    unknown = sorted(set(data) - set(_PROFILE_KEYS))
    if unknown:
        raise ProfileError(f"unknown device profile keys: {', '.join(unknown)}")
    missing = [k for k in _PROFILE_KEYS if k != "block_size_bytes" and k not in data]
    if missing:
        raise ProfileError(f"missing device profile keys: {', '.join(missing)}")
    values = {}
    for key, typ in _PROFILE_KEYS.items():
        if key not in data:
            continue
        try:
            values[key] = typ(data[key])
        except (TypeError, ValueError):
            raise ProfileError(f"{key}: cannot interpret {data[key]!r} as {typ.__name__}") from None
    try:
        kind = DeviceKind(values["kind"].upper())
    except ValueError:
        raise ProfileError(f"kind: expected SSD or HDD, got {values['kind']!r}") from None
    return DeviceProfile(kind, values["zone_capacity_bytes"], values["zone_count"],
                         values["seq_read_Bps"], values["seq_write_Bps"],
                         values["rand_read_iops"], values.get("block_size_bytes", 4 * KiB))


def load_profile(path: str | Path) -> DeviceProfile:
    """Read a device profile from a YAML key/value file."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ProfileError(f"{path}: expected a key/value mapping")
    return profile_from_mapping(data)


def profile_to_mapping(profile: DeviceProfile) -> dict:
    return {
        "kind": profile.kind.value,
        "zone_capacity_bytes": profile.zone_capacity,
        "zone_count": profile.zone_count,
        "seq_read_Bps": profile.seq_read_rate,
        "seq_write_Bps": profile.seq_write_rate,
        "rand_read_iops": profile.rand_read_iops,
        "block_size_bytes": profile.block_size,
    }


@dataclass(frozen=True)
class IoRequest:
    kind: IoKind
    size: int

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("request size must be positive")


def service_time(profile: DeviceProfile, request: IoRequest) -> float:
    """Seconds the device needs to serve ``request`` at queue depth one."""
    if request.kind is IoKind.SEQ_READ:
        return request.size / profile.seq_read_rate
    if request.kind is IoKind.SEQ_WRITE:
        return request.size / profile.seq_write_rate
    return math.ceil(request.size / profile.block_size) / profile.rand_read_iops


@dataclass
class ZoneState:
    zone_id: int
    capacity: int
    write_pointer: int = 0
    state: ZoneCondition = ZoneCondition.EMPTY
    data: bytearray = field(default_factory=bytearray, repr=False)


@dataclass
class DeviceStats:
    bytes_written: int = 0
    bytes_read: int = 0
    requests: int = 0
    busy_time: float = 0.0
    resets: int = 0


class ZonedDevice:
    """In-memory zoned device with one FIFO service channel."""

    def __init__(self, profile: DeviceProfile, name: str | None = None):
        self.profile = profile
        self.kind = profile.kind
        self.name = name or profile.kind.value.lower()
        self.zones = [ZoneState(i, profile.zone_capacity) for i in range(profile.zone_count)]
        self.busy_until = 0.0
        self.stats = DeviceStats()

    def __repr__(self):
        return f"ZonedDevice({self.name}, zones={len(self.zones)})"

    def zone(self, zone_id: int) -> ZoneState:
        return self.zones[zone_id]

    def append(self, zone_id: int, payload: bytes) -> int:
        z = self.zones[zone_id]
        if z.state is ZoneCondition.FULL:
            raise ZoneNotWritable(f"{self.name} zone {zone_id} is full")
        n = len(payload)
        if z.write_pointer + n > z.capacity:
            raise ZoneFull(f"{self.name} zone {zone_id}: {n} bytes at wp {z.write_pointer} "
                           f"exceeds capacity {z.capacity}")
        offset = z.write_pointer
        if n == 0:
            return offset
        z.data += payload
        z.write_pointer += n
        z.state = ZoneCondition.FULL if z.write_pointer == z.capacity else ZoneCondition.OPEN
        return offset

    def read(self, zone_id: int, offset: int, length: int) -> bytes:
        z = self.zones[zone_id]
        if offset < 0 or length < 0 or offset + length > z.write_pointer:
            raise ReadBeyondWritePointer(
                f"{self.name} zone {zone_id}: [{offset}, {offset + length}) beyond wp {z.write_pointer}")
        return bytes(z.data[offset:offset + length])

    def reset(self, zone_id: int) -> None:
        z = self.zones[zone_id]
        if z.state is ZoneCondition.EMPTY:
            return
        z.data = bytearray()
        z.write_pointer = 0
        z.state = ZoneCondition.EMPTY
        self.stats.resets += 1

    def finish(self, zone_id: int) -> None:
        """Close a zone early; its unwritten tail is lost until reset."""
        z = self.zones[zone_id]
        if z.write_pointer > 0:
            z.state = ZoneCondition.FULL

    def used_bytes(self) -> int:
        return sum(z.write_pointer for z in self.zones)

    def submit(self, kind: IoKind, size: int, at: float) -> float:
        """Queue a request arriving at ``at`` and return its completion time."""
        duration = service_time(self.profile, IoRequest(kind, size))
        start = at if at > self.busy_until else self.busy_until
        self.busy_until = start + duration
        st = self.stats
        st.requests += 1
        st.busy_time += duration
        if kind is IoKind.SEQ_WRITE:
            st.bytes_written += size
        else:
            st.bytes_read += size
        return self.busy_until
