"""Bloom filter with double hashing (k probes derived from one 64-bit digest)."""

from __future__ import annotations

import hashlib
import math

import numpy as np


def key_hash(key: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def _hash_pair(key: bytes) -> tuple[int, int]:
    h = key_hash(key)
    return h & 0xFFFFFFFF, (h >> 32) | 1


class BloomFilter:
    def __init__(self, nbits: int, k: int, bits: bytearray | None = None):
        self.nbits = nbits
        self.k = k
        self.bits = bits if bits is not None else bytearray((nbits + 7) // 8)

    @classmethod
    def build(cls, keys, bits_per_key: int = 10) -> "BloomFilter":
        return cls.from_hashes([key_hash(k) for k in keys], bits_per_key)

    @classmethod
    def from_hashes(cls, hashes: list[int], bits_per_key: int = 10) -> "BloomFilter":
        """Filter over keys given by their :func:`key_hash` values."""
        nbits = -(-max(64, len(hashes) * bits_per_key) // 8) * 8
        k = max(1, min(30, round(bits_per_key * math.log(2))))
        bf = cls(nbits, k)
        if hashes:
            h = np.array(hashes, dtype=np.uint64)
            h1 = h & np.uint64(0xFFFFFFFF)
            h2 = (h >> np.uint64(32)) | np.uint64(1)
            pos = (h1[None, :] + np.arange(k, dtype=np.uint64)[:, None] * h2[None, :]) % np.uint64(nbits)
            mask = np.zeros(nbits, dtype=bool)
            mask[pos.ravel()] = True
            bf.bits = bytearray(np.packbits(mask, bitorder="little").tobytes())
        return bf

    def add(self, key: bytes) -> None:
        h1, h2 = _hash_pair(key)
        m = self.nbits
        bits = self.bits
        for i in range(self.k):
            pos = (h1 + i * h2) % m
            bits[pos >> 3] |= 1 << (pos & 7)

    def may_contain(self, key: bytes) -> bool:
        h1, h2 = _hash_pair(key)
        m = self.nbits
        bits = self.bits
        for i in range(self.k):
            pos = (h1 + i * h2) % m
            if not bits[pos >> 3] & (1 << (pos & 7)):
                return False
        return True

    def to_bytes(self) -> bytes:
        # bit array, then one trailing byte holding the probe count
        return bytes(self.bits) + bytes([self.k])

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        return cls((len(data) - 1) * 8, data[-1], bytearray(data[:-1]))
