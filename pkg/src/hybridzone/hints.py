"""Hints passed from the LSM-tree to the storage layer, and their delivery bus."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Union


class ProtocolViolation(Exception):
    pass


@dataclass(frozen=True)
class Flush:
    sst_id: int


@dataclass(frozen=True)
class CompactionBegin:
    compaction_id: int
    selected_sst_ids: tuple[int, ...]
    output_level: int


@dataclass(frozen=True)
class CompactionOutput:
    compaction_id: int
    sst_id: int
    level: int


@dataclass(frozen=True)
class CompactionEnd:
    compaction_id: int
    selected_count: int
    produced_sst_ids: tuple[int, ...]


@dataclass(frozen=True)
class CacheEvict:
    sst_id: int
    block_offset: int
    block_payload: bytes = field(repr=False)


Hint = Union[Flush, CompactionBegin, CompactionOutput, CompactionEnd, CacheEvict]
Subscriber = Callable[[Hint], None]


def hint_record(hint: Hint) -> dict:
    """Flat dict form of a hint; block payloads are reduced to their length."""
    if isinstance(hint, CacheEvict):
        rec = {"sst_id": hint.sst_id, "block_offset": hint.block_offset,
               "payload_len": len(hint.block_payload)}
    else:
        rec = asdict(hint)
        for k, v in rec.items():
            if isinstance(v, tuple):
                rec[k] = list(v)
    return {"type": type(hint).__name__, **rec}


class HintBus:
    """Synchronous, ordered delivery of hints to every subscriber.

    The bus validates the three-phase compaction protocol: one Begin, any
    number of Outputs, one End, per compaction id.
    """

    def __init__(self):
        self._subscribers: list[Subscriber] = []
        self._open: dict[int, CompactionBegin] = {}
        self.published = 0
        self.trace = None

    def subscribe(self, fn: Subscriber) -> None:
        self._subscribers.append(fn)

    @property
    def active_compactions(self) -> dict[int, CompactionBegin]:
        return dict(self._open)

    def _validate(self, hint: Hint) -> None:
        if isinstance(hint, CompactionBegin):
            if hint.compaction_id in self._open:
                raise ProtocolViolation(f"compaction {hint.compaction_id} began twice")
            if hint.output_level < 1:
                raise ProtocolViolation("compaction output level must be >= 1")
        elif isinstance(hint, CompactionOutput):
            begin = self._open.get(hint.compaction_id)
            if begin is None:
                raise ProtocolViolation(f"output for compaction {hint.compaction_id} before its begin")
            if hint.level != begin.output_level:
                raise ProtocolViolation(
                    f"compaction {hint.compaction_id} output at L{hint.level}, began for L{begin.output_level}")
        elif isinstance(hint, CompactionEnd):
            begin = self._open.get(hint.compaction_id)
            if begin is None:
                raise ProtocolViolation(f"end of compaction {hint.compaction_id} before its begin")
            if hint.selected_count != len(begin.selected_sst_ids):
                raise ProtocolViolation(
                    f"compaction {hint.compaction_id} ended with selected_count {hint.selected_count}, "
                    f"began with {len(begin.selected_sst_ids)}")
        elif isinstance(hint, CacheEvict):
            if hint.block_payload is None:
                raise ProtocolViolation("cache hint without block payload")

    def publish(self, hint: Hint) -> None:
        self._validate(hint)
        if isinstance(hint, CompactionBegin):
            self._open[hint.compaction_id] = hint
        elif isinstance(hint, CompactionEnd):
            del self._open[hint.compaction_id]
        self.published += 1
        if self.trace is not None:
            self.trace.write(json.dumps(hint_record(hint), sort_keys=True) + "\n")
        for fn in self._subscribers:
            fn(hint)
