import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import tiny_system
from hybridzone.device import DeviceKind
from hybridzone.hints import CompactionBegin, CompactionOutput, HintBus
from hybridzone.placement import LevelLedger, WriteGuidedPlacement, compute_tiering
from hybridzone.storage import WriteCause
from oracles import tiering_oracle


def test_tiering_examples():
    assert compute_tiering([2, 1, 0, 0, 0], [1, 0, 3, 0, 0], 5) == (2, 1)
    t, _ = compute_tiering([0] * 5, [0] * 5, 5)
    assert t == 5  # sentinel: everything fits on the SSD
    assert compute_tiering([3, 0, 0], [2, 0, 0], 5) == (0, 5)


def test_tiering_matches_oracle_on_1000_ledgers():
    rng = random.Random(2024)
    for _ in range(1000):
        n = rng.randint(1, 7)
        a = [rng.randint(0, 50) for _ in range(n)]
        d = [rng.randint(0, 50) for _ in range(n)]
        c = rng.randint(0, 50)
        assert compute_tiering(a, d, c) == tiering_oracle(a, d, c), (a, d, c)


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=1, max_size=7),
       st.integers(0, 350))
def test_tiering_matches_oracle_property(pairs, c):
    a = [p[0] for p in pairs]
    d = [p[1] for p in pairs]
    t, reserved = compute_tiering(a, d, c)
    assert (t, reserved) == tiering_oracle(a, d, c)
    assert 0 <= t <= len(a) and reserved >= 0


def test_ledger_validation_and_record():
    with pytest.raises(ValueError):
        LevelLedger([0, 0], [0], 3)
    rec = LevelLedger([2, 1, 0], [1, 0, 3], 5, 1).as_record()
    assert rec["t"] == 2 and rec["reserved"] == 1 and rec["D"] == [1, 0, 3]


def _example_policy():
    """Ledger A=[2,1,0,0,0], D=[1,0,3,0,0], C_ssd=5 on a real storage pool."""
    system = tiny_system("p", ssd_zones=7, level_count=5)
    storage = system.storage
    pol = WriteGuidedPlacement(storage, 5, wal_zones=lambda: 1)
    bus = HintBus()
    bus.subscribe(pol.on_hint)
    for level in (0, 0, 1):
        storage.alloc_ssd(level)
    bus.publish(CompactionBegin(1, (1, 2, 3), 2))
    assert pol.c_ssd == 5 and pol.tiering() == (2, 1)
    return pol, bus


def test_flush_goes_to_ssd_below_tiering_level():
    pol, _ = _example_policy()
    assert pol.select_target(0, WriteCause.FLUSH, 1000).device is DeviceKind.SSD


def test_output_above_tiering_level_goes_to_hdd():
    pol, _ = _example_policy()
    loc = pol.select_target(3, WriteCause.COMPACTION, 2500)
    assert loc.device is DeviceKind.HDD
    # ceil(2500 / 1 KiB) HDD zones
    assert len(loc.zones) == 3


def test_reservation_counter_is_consumed():
    pol, bus = _example_policy()
    first = pol.select_target(2, WriteCause.COMPACTION, 1000)
    bus.publish(CompactionOutput(1, 50, 2))
    second = pol.select_target(2, WriteCause.COMPACTION, 1000)
    assert first.device is DeviceKind.SSD
    assert second.device is DeviceKind.HDD


def test_demand_sums_concurrent_compactions():
    pol, bus = _example_policy()
    bus.publish(CompactionBegin(2, (7, 8, 9, 10), 2))
    assert pol.demand() == [1, 0, 7, 0, 0]


def test_d0_tracks_wal_zones():
    system = tiny_system("p")
    store, pol = system.store, system.policy
    assert pol.demand()[0] == 0
    for i in range(40):
        store.put(b"k%02d" % i, b"v" * 40)
    assert pol.demand()[0] == store.wal.zones_in_use >= 1


def test_no_ssd_placement_above_tiering_level():
    system = tiny_system("p")
    pol, store, storage = system.policy, system.store, system.storage
    decisions = []
    inner = pol.select_target

    def spy(level, cause, size):
        t, _ = pol.tiering()
        loc = inner(level, cause, size)
        decisions.append((level, cause, t, loc.device))
        return loc

    pol.select_target = spy
    rng = random.Random(5)
    for i in range(2500):
        store.put(b"k%05d" % rng.randrange(4000), bytes(rng.randrange(10, 60)))
        if i % 40 == 0:
            store.run_background()
        assert sum(storage.allocated_per_level(pol.level_count)) <= pol.c_ssd
    assert any(d[3] is DeviceKind.HDD for d in decisions)
    assert any(d[3] is DeviceKind.SSD for d in decisions)
    for level, cause, t, dev in decisions:
        if cause is WriteCause.COMPACTION and level > t:
            assert dev is DeviceKind.HDD
    assert all(x >= 0 for x in pol.demand())
