"""SSTable encoding and metadata.

File layout (all integers little-endian)::

    data block*      entries: u16 klen | key | u32 vlen | value | u64 seqno
    index block      per data block: u16 klen | last key | u64 block offset
    filter           Bloom bit array | u8 probe count
    footer (36 B)    u64 index_off | u32 index_len | u64 filter_off |
                     u32 filter_len | u32 entry_count | u64 magic

A tombstone is written with ``vlen == 0xFFFFFFFF`` and no value bytes.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from itertools import repeat
from dataclasses import dataclass, field

from ..storage import Location
from .bloom import BloomFilter, key_hash

TOMBSTONE_LEN = 0xFFFFFFFF
MAGIC = 0x5A4F4E45534C534D  # "ZONESLSM"

_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_FOOTER = struct.Struct("<QIQIIQ")
FOOTER_SIZE = _FOOTER.size

# (key, seqno, value); value is None for a tombstone
Entry = tuple


class CorruptSst(ValueError):
    pass


def entry_size(key: bytes, value: bytes | None) -> int:
    return 14 + len(key) + (0 if value is None else len(value))


def encode_entry(key: bytes, seqno: int, value: bytes | None) -> bytes:
    if value is None:
        return b"".join((_U16.pack(len(key)), key, _U32.pack(TOMBSTONE_LEN), _U64.pack(seqno)))
    return b"".join((_U16.pack(len(key)), key, _U32.pack(len(value)), value, _U64.pack(seqno)))


def decode_block(data: bytes) -> list[Entry]:
    out = []
    pos = 0
    end = len(data)
    u16 = _U16.unpack_from
    u32 = _U32.unpack_from
    u64 = _U64.unpack_from
    while pos < end:
        (klen,) = u16(data, pos)
        pos += 2
        key = data[pos:pos + klen]
        pos += klen
        (vlen,) = u32(data, pos)
        pos += 4
        if vlen == TOMBSTONE_LEN:
            value = None
        else:
            value = data[pos:pos + vlen]
            pos += vlen
        (seq,) = u64(data, pos)
        pos += 8
        out.append((key, seq, value))
    if pos != end:
        raise CorruptSst("data block overruns its length")
    return out


@dataclass
class SstContents:
    """Parsed metadata blocks of an SST; kept pinned in memory."""
    index_keys: list[bytes]
    index_offsets: list[int]
    index_offset: int
    bloom: BloomFilter
    entry_count: int
    file_size: int
    # Per-entry key, seqno, tombstone flag and end offset; entries are contiguous.
    entry_keys: list[bytes] = field(default_factory=list, repr=False)
    entry_seqs: list[int] = field(default_factory=list, repr=False)
    entry_dead: list[bool] = field(default_factory=list, repr=False)
    entry_ends: list[int] = field(default_factory=list, repr=False)
    entry_hashes: list[int] = field(default_factory=list, repr=False)

    def entry_spans(self, data: bytes):
        """Yield ``(key, -seqno, dead, data, start, end, hash)`` for every entry."""
        starts = [0]
        starts += self.entry_ends[:-1]
        return zip(self.entry_keys, [-q for q in self.entry_seqs], self.entry_dead,
                   repeat(data), starts, self.entry_ends, self.entry_hashes)

    def block_extent(self, i: int) -> tuple[int, int]:
        start = self.index_offsets[i]
        end = self.index_offsets[i + 1] if i + 1 < len(self.index_offsets) else self.index_offset
        return start, end - start

    def find_block(self, key: bytes) -> int | None:
        i = bisect_left(self.index_keys, key)
        return i if i < len(self.index_keys) else None


class SstBuilder:
    def __init__(self, block_size: int = 4096, bits_per_key: int = 10):
        self.block_size = block_size
        self.bits_per_key = bits_per_key
        self._blocks: list[bytes] = []
        self._cur: list[bytes] = []
        self._cur_len = 0
        self._cur_last: bytes | None = None
        self._data_len = 0
        self._index_keys: list[bytes] = []
        self._index_offsets: list[int] = []
        self._keys: list[bytes] = []
        self._seqs: list[int] = []
        self._dead: list[bool] = []
        self._ends: list[int] = []
        self._index_len = 0

    def __len__(self):
        return len(self._keys)

    @property
    def first_key(self) -> bytes | None:
        return self._keys[0] if self._keys else None

    def _close_block(self):
        if not self._cur:
            return
        block = b"".join(self._cur)
        self._index_keys.append(self._cur_last)
        self._index_offsets.append(self._data_len)
        self._index_len += 10 + len(self._cur_last)
        self._blocks.append(block)
        self._data_len += len(block)
        self._cur = []
        self._cur_len = 0

    def estimated_size(self, extra_key: bytes = b"", extra_len: int = 0) -> int:
        """File size if one more entry of ``extra_len`` bytes were added."""
        n = len(self._keys) + (1 if extra_len else 0)
        filt = -(-max(64, n * self.bits_per_key) // 8) + 1
        idx = self._index_len
        if self._cur:
            idx += 10 + len(self._cur_last)
        if extra_len:
            idx += 10 + len(extra_key)
        return self._data_len + self._cur_len + extra_len + idx + filt + FOOTER_SIZE

    def add(self, key: bytes, seqno: int, value: bytes | None) -> None:
        if self._keys and key <= self._keys[-1]:
            raise ValueError("keys must be added in strictly ascending order")
        self.push(key, seqno, value is None, encode_entry(key, seqno, value))

    def push(self, key: bytes, seqno: int, dead: bool, enc: bytes, limit: int | None = None) -> bool:
        """Append an encoded entry; the caller guarantees key order.

        With ``limit`` set, a non-empty builder refuses (returns False) an entry
        that would grow the file beyond ``limit`` bytes.
        """
        n = len(enc)
        keys = self._keys
        if limit is not None and keys:
            filt = -(-max(64, (len(keys) + 1) * self.bits_per_key) // 8) + 1
            idx = self._index_len + 10 + len(key) + (10 + len(self._cur_last) if self._cur else 0)
            if self._data_len + self._cur_len + n + idx + filt + FOOTER_SIZE > limit:
                return False
        if self._cur and self._cur_len + n > self.block_size:
            self._close_block()
        self._cur.append(enc)
        self._cur_len += n
        self._cur_last = key
        keys.append(key)
        self._seqs.append(seqno)
        self._dead.append(dead)
        self._ends.append(self._data_len + self._cur_len)
        return True

    def finish(self) -> tuple[bytes, SstContents]:
        self._close_block()
        return _assemble(self._blocks, self._index_keys, self._index_offsets, self._data_len,
                         self._keys, self._seqs, self._dead, self._ends,
                         [key_hash(k) for k in self._keys], self.bits_per_key)


def _assemble(blocks, index_keys, index_offsets, data_len, keys, seqs, dead, ends, hashes,
              bits_per_key) -> tuple[bytes, SstContents]:
    bloom = BloomFilter.from_hashes(hashes, bits_per_key)
    u16, u64 = _U16.pack, _U64.pack
    index = b"".join([u16(len(k)) + k + u64(off) for k, off in zip(index_keys, index_offsets)])
    filt = bloom.to_bytes()
    filter_off = data_len + len(index)
    footer = _FOOTER.pack(data_len, len(index), filter_off, len(filt), len(keys), MAGIC)
    data = b"".join(blocks) + index + filt + footer
    contents = SstContents(index_keys, index_offsets, data_len, bloom, len(keys), len(data),
                           keys, seqs, dead, ends, hashes)
    return data, contents


def pack_ssts(entries, limit: int, block_size: int = 4096, bits_per_key: int = 10) -> list:
    """Cut ``(key, seqno, dead, encoded, hash)`` entries, ascending by key, into SSTs.

    ``hash`` may be None, in which case it is computed.  Returns
    ``(first_key, data, contents)`` per SST, byte-identical to what
    :class:`SstBuilder` produces when fed the same entries and cut at the same
    points; each file stays within ``limit`` bytes unless one entry exceeds it.
    """
    out = []
    footer = FOOTER_SIZE
    bpk = bits_per_key
    keys, seqs, dead, ends, hashes = [], [], [], [], []
    blocks, ikeys, ioffs = [], [], []
    cur, cur_len, cur_last, data_len, idx_len = [], 0, b"", 0, 0
    for key, seq, dd, enc, h in entries:
        n = len(enc)
        if keys:
            nf = (len(keys) + 1) * bpk
            if nf < 64:
                nf = 64
            filt = (nf + 7) // 8 + 1
            idx = idx_len + 10 + len(key) + (10 + len(cur_last) if cur else 0)
            if data_len + cur_len + n + idx + filt + footer > limit:
                if cur:
                    blocks.append(b"".join(cur))
                    ikeys.append(cur_last)
                    ioffs.append(data_len)
                    data_len += cur_len
                out.append((keys[0], *_assemble(blocks, ikeys, ioffs, data_len, keys, seqs, dead,
                                                ends, hashes, bpk)))
                keys, seqs, dead, ends, hashes = [], [], [], [], []
                blocks, ikeys, ioffs = [], [], []
                cur, cur_len, data_len, idx_len = [], 0, 0, 0
        if cur and cur_len + n > block_size:
            blocks.append(b"".join(cur))
            ikeys.append(cur_last)
            ioffs.append(data_len)
            idx_len += 10 + len(cur_last)
            data_len += cur_len
            cur, cur_len = [], 0
        cur.append(enc)
        cur_len += n
        cur_last = key
        keys.append(key)
        seqs.append(seq)
        dead.append(dd)
        ends.append(data_len + cur_len)
        hashes.append(key_hash(key) if h is None else h)
    if keys:
        if cur:
            blocks.append(b"".join(cur))
            ikeys.append(cur_last)
            ioffs.append(data_len)
            data_len += cur_len
        out.append((keys[0], *_assemble(blocks, ikeys, ioffs, data_len, keys, seqs, dead, ends,
                                        hashes, bpk)))
    return out


def build_sst(entries, block_size: int = 4096, bits_per_key: int = 10) -> tuple[bytes, SstContents]:
    b = SstBuilder(block_size, bits_per_key)
    for key, seq, value in entries:
        b.add(key, seq, value)
    return b.finish()


def parse_footer(footer: bytes) -> tuple[int, int, int, int, int]:
    if len(footer) != FOOTER_SIZE:
        raise CorruptSst("short footer")
    index_off, index_len, filter_off, filter_len, count, magic = _FOOTER.unpack(footer)
    if magic != MAGIC:
        raise CorruptSst("bad magic")
    return index_off, index_len, filter_off, filter_len, count


def parse_index(index: bytes) -> tuple[list[bytes], list[int]]:
    keys, offsets = [], []
    pos = 0
    while pos < len(index):
        (klen,) = _U16.unpack_from(index, pos)
        pos += 2
        keys.append(index[pos:pos + klen])
        pos += klen
        (off,) = _U64.unpack_from(index, pos)
        pos += 8
        offsets.append(off)
    return keys, offsets


def parse_sst(data: bytes) -> SstContents:
    """Parse the metadata blocks of a complete SST file."""
    if len(data) < FOOTER_SIZE:
        raise CorruptSst("file shorter than footer")
    index_off, index_len, filter_off, filter_len, count = parse_footer(data[-FOOTER_SIZE:])
    if not (index_off + index_len == filter_off and filter_off + filter_len == len(data) - FOOTER_SIZE):
        raise CorruptSst("footer offsets outside the file")
    keys, offsets = parse_index(data[index_off:index_off + index_len])
    if any(b <= a for a, b in zip(offsets, offsets[1:])):
        raise CorruptSst("index offsets not increasing")
    bloom = BloomFilter.from_bytes(data[filter_off:filter_off + filter_len])
    contents = SstContents(keys, offsets, index_off, bloom, count, len(data))
    for key, seq, dead, enc in iter_raw(data, index_off):
        contents.entry_keys.append(key)
        contents.entry_seqs.append(seq)
        contents.entry_dead.append(dead)
        contents.entry_ends.append((contents.entry_ends[-1] if contents.entry_ends else 0) + len(enc))
        contents.entry_hashes.append(key_hash(key))
    return contents


def iter_entries(data: bytes, contents: SstContents):
    for i in range(len(contents.index_offsets)):
        off, n = contents.block_extent(i)
        yield from decode_block(data[off:off + n])


def iter_raw(data: bytes, end: int):
    """Yield ``(key, seqno, is_tombstone, encoded)`` over the data region ``[0, end)``."""
    pos = 0
    u16 = _U16.unpack_from
    u32 = _U32.unpack_from
    u64 = _U64.unpack_from
    while pos < end:
        start = pos
        (klen,) = u16(data, pos)
        key = data[pos + 2:pos + 2 + klen]
        pos += 2 + klen
        (vlen,) = u32(data, pos)
        pos += 4
        dead = vlen == TOMBSTONE_LEN
        if not dead:
            pos += vlen
        (seq,) = u64(data, pos)
        pos += 8
        yield key, seq, dead, data[start:pos]


@dataclass(eq=False)
class SstMeta:
    sst_id: int
    level: int
    min_key: bytes
    max_key: bytes
    data_size: int
    location: Location
    created_at: float
    contents: SstContents = field(repr=False)
    read_count: int = 0
    selected_for_compaction: bool = False
    migrating: bool = False
    live: bool = True

    def overlaps(self, lo: bytes, hi: bytes) -> bool:
        return not (self.max_key < lo or self.min_key > hi)

    def read_rate(self, now: float, age_floor: float = 1.0) -> float:
        return self.read_count / max(now - self.created_at, age_floor)
