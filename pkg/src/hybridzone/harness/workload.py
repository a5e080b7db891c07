"""YCSB-style key and operation generators."""

from __future__ import annotations

import struct
from functools import lru_cache
from typing import Iterator

import numpy as np

from .config import WorkloadSpec

OPS = ("read", "update", "insert", "rmw", "scan")
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1
_BATCH = 4096


def fnv1a64(n: int) -> int:
    h = _FNV_OFFSET
    for b in n.to_bytes(8, "little"):
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def make_key(key_id: int, key_size: int = 24) -> bytes:
    key = b"user%020d" % fnv1a64(key_id)
    if key_size >= len(key):
        return key.ljust(key_size, b"0")
    return key[:key_size]


_HEADER = struct.Struct("<QQ")


def make_value(key_id: int, version: int, value_size: int = 1000) -> bytes:
    head = _HEADER.pack(key_id, version)
    if value_size <= len(head):
        return head[:value_size]
    return head + _filler(value_size - len(head))


@lru_cache(maxsize=8)
def _filler(n: int) -> bytes:
    return bytes((i * 131 + 7) & 0xFF for i in range(n))


@lru_cache(maxsize=16)
def _zipf_cdf(alpha: float, n: int) -> np.ndarray:
    weights = np.arange(1, n + 1, dtype=np.float64) ** -alpha
    cdf = np.cumsum(weights)
    return cdf / cdf[-1]


def zipf_next(alpha: float, key_space: int, rng: np.random.Generator) -> int:
    """One rank in ``[0, key_space)`` with P(rank k) proportional to 1/(k+1)^alpha."""
    if key_space < 1:
        raise ValueError("key_space must be at least 1")
    if key_space == 1:
        return 0
    idx = int(np.searchsorted(_zipf_cdf(float(alpha), key_space), rng.random(), side="right"))
    return min(idx, key_space - 1)


class ZipfSampler:
    """Batched Zipf ranks over a fixed key space."""

    def __init__(self, alpha: float, key_space: int, rng: np.random.Generator):
        if key_space < 1:
            raise ValueError("key_space must be at least 1")
        self.key_space = key_space
        self.rng = rng
        self._cdf = _zipf_cdf(float(alpha), key_space)
        self._buf: list[int] = []

    def __call__(self) -> int:
        if not self._buf:
            u = self.rng.random(_BATCH)
            ranks = np.minimum(np.searchsorted(self._cdf, u, side="right"), self.key_space - 1)
            self._buf = ranks[::-1].tolist()
        return self._buf.pop()


class OperationStream:
    """Yields ``(op, key_id, scan_len)`` for the run phase of a workload."""

    def __init__(self, spec: WorkloadSpec, record_count: int):
        if record_count < 1:
            raise ValueError("the run phase needs a loaded key space")
        self.spec = spec
        self.record_count = record_count
        self.inserted = 0
        self.rng = np.random.Generator(np.random.PCG64(spec.seed))
        mix = np.array(spec.mix(), dtype=np.float64)
        self._cum = np.cumsum(mix / mix.sum())
        if spec.distribution == "uniform":
            self._sampler = None
        else:
            # "latest" draws a recency rank; inserts can extend the space by ``ops``.
            space = record_count + (spec.ops if spec.distribution == "latest" else 0)
            self._sampler = ZipfSampler(spec.zipf_alpha, space, self.rng)

    @property
    def key_count(self) -> int:
        return self.record_count + self.inserted

    def _key(self) -> int:
        n = self.key_count
        if self._sampler is None:
            return int(self.rng.integers(n))
        if self.spec.distribution == "latest":
            r = self._sampler()
            while r >= n:
                r = self._sampler()
            return n - 1 - r
        return self._sampler()

    def __iter__(self) -> Iterator[tuple[str, int, int]]:
        spec = self.spec
        done = 0
        while done < spec.ops:
            n = min(_BATCH, spec.ops - done)
            kinds = np.searchsorted(self._cum, self.rng.random(n), side="right").tolist()
            lengths = self.rng.integers(1, spec.scan_max + 1, n).tolist()
            for kind, length in zip(kinds, lengths):
                op = OPS[min(kind, len(OPS) - 1)]
                if op == "insert":
                    key_id = self.key_count
                    self.inserted += 1
                else:
                    key_id = self._key()
                yield op, key_id, length if op == "scan" else 0
            done += n
