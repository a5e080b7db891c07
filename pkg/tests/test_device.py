import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridzone.device import (DeviceKind, DeviceProfile, IoKind, IoRequest, ProfileError,
                               ReadBeyondWritePointer, ZoneCondition, ZonedDevice, ZoneFull,
                               ZoneNotWritable, hdd_profile, load_profile, profile_to_mapping,
                               service_time, ssd_profile)

KiB = 1024
MiB = 1024 * KiB


def test_empty_append_is_identity():
    dev = ZonedDevice(ssd_profile())
    assert dev.append(0, b"") == 0
    assert dev.zone(0).write_pointer == 0
    assert dev.zone(0).state is ZoneCondition.EMPTY


def test_sst_fills_939_percent_of_ssd_zone():
    dev = ZonedDevice(ssd_profile())
    sst = int(1011.2 * KiB)
    assert dev.append(3, bytes(sst)) == 0
    z = dev.zone(3)
    assert z.write_pointer == sst
    assert round(100 * z.write_pointer / z.capacity, 1) == 93.9


def test_append_past_capacity():
    dev = ZonedDevice(ssd_profile())
    cap = dev.profile.zone_capacity
    dev.append(0, bytes(cap - 4 * KiB))
    with pytest.raises(ZoneFull):
        dev.append(0, bytes(8 * KiB))
    # the failed append left the zone untouched
    assert dev.zone(0).write_pointer == cap - 4 * KiB


def test_full_zone_rejects_appends():
    dev = ZonedDevice(hdd_profile(4))
    dev.append(1, bytes(dev.profile.zone_capacity))
    assert dev.zone(1).state is ZoneCondition.FULL
    with pytest.raises(ZoneNotWritable):
        dev.append(1, b"x")


def test_write_then_read():
    dev = ZonedDevice(ssd_profile(2))
    dev.append(0, b"abc")
    assert dev.read(0, 0, 3) == b"abc"
    with pytest.raises(ReadBeyondWritePointer):
        dev.read(0, 3, 1)


def test_middle_of_three_appends():
    dev = ZonedDevice(ssd_profile(2))
    offs = [dev.append(1, p) for p in (b"first-", b"MIDDLE", b"-last")]
    assert offs == [0, 6, 12]
    assert dev.read(1, 6, 6) == b"MIDDLE"


def test_reset_semantics():
    dev = ZonedDevice(ssd_profile(2))
    dev.append(0, bytes(100))
    assert dev.zone(0).state is ZoneCondition.OPEN
    dev.reset(0)
    assert dev.zone(0).write_pointer == 0
    assert dev.zone(0).state is ZoneCondition.EMPTY
    with pytest.raises(ReadBeyondWritePointer):
        dev.read(0, 0, 1)
    assert dev.append(0, bytes(4 * KiB)) == 0
    dev.reset(1)  # EMPTY zone: no-op
    assert dev.stats.resets == 1


def test_service_times():
    ssd, hdd = ssd_profile(), hdd_profile()
    assert service_time(ssd, IoRequest(IoKind.SEQ_WRITE, MiB)) == pytest.approx(1 / 1002.8)
    assert service_time(ssd, IoRequest(IoKind.SEQ_WRITE, MiB)) * 1000 == pytest.approx(0.997, abs=5e-4)
    assert service_time(hdd, IoRequest(IoKind.RAND_READ, 4 * KiB)) == pytest.approx(1 / 115)
    assert service_time(hdd, IoRequest(IoKind.RAND_READ, 4 * KiB)) * 1000 == pytest.approx(8.70, abs=5e-3)
    rate = hdd.seq_read_rate
    assert service_time(hdd, IoRequest(IoKind.SEQ_READ, int(rate))) == 1.0
    # a random read of 5 KiB touches two blocks
    assert service_time(hdd, IoRequest(IoKind.RAND_READ, 5 * KiB)) == pytest.approx(2 / 115)


def test_request_and_profile_validation():
    with pytest.raises(ValueError):
        IoRequest(IoKind.SEQ_READ, 0)
    with pytest.raises(ProfileError):
        DeviceProfile(DeviceKind.SSD, 0, 1, 1.0, 1.0, 1.0)
    with pytest.raises(ProfileError):
        DeviceProfile(DeviceKind.SSD, 1, 1, 1.0, 0.0, 1.0)


def test_fifo_queueing():
    dev = ZonedDevice(hdd_profile())
    t = 1 / 115
    assert dev.submit(IoKind.RAND_READ, 4 * KiB, 0.0) == pytest.approx(t)
    # second request arrives while the first is in service
    assert dev.submit(IoKind.RAND_READ, 4 * KiB, 0.001) == pytest.approx(2 * t)
    # an idle gap is not billed
    assert dev.submit(IoKind.RAND_READ, 4 * KiB, 1.0) == pytest.approx(1.0 + t)


def test_profile_file_roundtrip(tmp_path):
    p = tmp_path / "ssd.yaml"
    p.write_text(yaml.safe_dump(profile_to_mapping(ssd_profile())))
    assert load_profile(p) == ssd_profile()
    p.write_text("kind: SSD\nzone_count: 3\n")
    with pytest.raises(ProfileError):
        load_profile(p)


@given(st.integers(1, 1 << 24), st.integers(1, 1 << 24))
def test_sequential_time_is_linear(a, b):
    prof = hdd_profile()
    one = service_time(prof, IoRequest(IoKind.SEQ_WRITE, a))
    assert service_time(prof, IoRequest(IoKind.SEQ_WRITE, 2 * a)) == pytest.approx(2 * one)
    ab = service_time(prof, IoRequest(IoKind.SEQ_READ, a + b))
    assert ab == pytest.approx(service_time(prof, IoRequest(IoKind.SEQ_READ, a))
                               + service_time(prof, IoRequest(IoKind.SEQ_READ, b)))


_ops = st.lists(st.one_of(
    st.tuples(st.just("append"), st.integers(0, 3), st.binary(max_size=70)),
    st.tuples(st.just("read"), st.integers(0, 3), st.integers(0, 130), st.integers(0, 70)),
    st.tuples(st.just("reset"), st.integers(0, 3)),
), max_size=60)


@settings(max_examples=300, deadline=None)
@given(_ops)
def test_zones_match_shadow_buffers(ops):
    cap = 128
    prof = DeviceProfile(DeviceKind.SSD, cap, 4, 1e6, 1e6, 100.0, block_size=16)
    dev = ZonedDevice(prof)
    shadow = [bytearray() for _ in range(4)]
    full = [False] * 4
    for op in ops:
        z = op[1]
        last_wp = dev.zone(z).write_pointer
        if op[0] == "append":
            payload = op[2]
            if full[z]:
                with pytest.raises(ZoneNotWritable):
                    dev.append(z, payload)
            elif len(shadow[z]) + len(payload) > cap:
                with pytest.raises(ZoneFull):
                    dev.append(z, payload)
            else:
                assert dev.append(z, payload) == len(shadow[z])
                shadow[z] += payload
                full[z] = len(shadow[z]) == cap
            assert dev.zone(z).write_pointer >= last_wp
        elif op[0] == "read":
            off, n = op[2], op[3]
            if off + n > len(shadow[z]):
                with pytest.raises(ReadBeyondWritePointer):
                    dev.read(z, off, n)
            else:
                assert dev.read(z, off, n) == bytes(shadow[z][off:off + n])
        else:
            dev.reset(z)
            shadow[z] = bytearray()
            full[z] = False
        zs = dev.zone(z)
        assert 0 <= zs.write_pointer <= cap
        assert zs.write_pointer == len(shadow[z])
        assert (zs.state is ZoneCondition.EMPTY) == (zs.write_pointer == 0)
        assert (zs.state is ZoneCondition.FULL) == full[z]
    assert dev.used_bytes() <= prof.zone_count * cap
    assert dev.used_bytes() == sum(map(len, shadow))
