from __future__ import annotations

from collections import OrderedDict
from typing import Callable, Hashable


class BlockCache:
    """Byte-budgeted LRU cache of SST blocks.

    ``on_evict(key, payload, is_data)`` runs for every evicted block.
    """

    def __init__(self, capacity: int, on_evict: Callable | None = None):
        self.capacity = capacity
        self.on_evict = on_evict
        self._items: OrderedDict = OrderedDict()  # key -> (payload, decoded, is_data)
        self.used = 0
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def __len__(self):
        return len(self._items)

    def __contains__(self, key):
        return key in self._items

    def get(self, key: Hashable):
        item = self._items.get(key)
        if item is None:
            self.misses += 1
            return None
        self._items.move_to_end(key)
        self.hits += 1
        return item[1]

    def insert(self, key: Hashable, payload: bytes, decoded=None, is_data: bool = True) -> None:
        old = self._items.pop(key, None)
        if old is not None:
            self.used -= len(old[0])
        self._items[key] = (payload, decoded, is_data)
        self.used += len(payload)
        while self.used > self.capacity and self._items:
            k, (p, _, data) = self._items.popitem(last=False)
            self.used -= len(p)
            self.evictions += 1
            if self.on_evict is not None:
                self.on_evict(k, p, data)

    def discard(self, key: Hashable) -> None:
        old = self._items.pop(key, None)
        if old is not None:
            self.used -= len(old[0])
