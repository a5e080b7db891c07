from .block_cache import BlockCache
from .bloom import BloomFilter
from .memtable import MemTable, WriteAheadLog
from .sstable import SstBuilder, SstContents, SstMeta, build_sst, parse_sst
from .store import CompactionPick, LsmConfig, LsmStore

__all__ = ["BlockCache", "BloomFilter", "CompactionPick", "LsmConfig", "LsmStore", "MemTable",
           "SstBuilder", "SstContents", "SstMeta", "WriteAheadLog", "build_sst", "parse_sst"]
