"""Experiment configuration: dataclass defaults, YAML loading, validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

KiB = 1024
MiB = 1024 * KiB

POLICIES = ("b1", "b2", "b3", "b4", "auto", "hhzs", "p", "pm", "pmc")
WORKLOADS = ("a", "b", "c", "d", "e", "f", "custom")
DISTRIBUTIONS = ("zipf", "latest", "uniform")
FORMATS = ("csv", "records")

# read, update, insert, rmw, scan percentages and key distribution per YCSB core workload
PRESETS = {
    "a": ((50, 50, 0, 0, 0), "zipf"),
    "b": ((95, 5, 0, 0, 0), "zipf"),
    "c": ((100, 0, 0, 0, 0), "zipf"),
    "d": ((95, 0, 5, 0, 0), "latest"),
    "e": ((0, 0, 5, 0, 95), "zipf"),
    "f": ((50, 0, 0, 50, 0), "zipf"),
}


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class WorkloadSpec:
    name: str = "a"
    read_pct: float = 50
    update_pct: float = 50
    insert_pct: float = 0
    rmw_pct: float = 0
    scan_pct: float = 0
    distribution: str = "zipf"
    zipf_alpha: float = 0.9
    scan_max: int = 100
    ops: int = 50_000
    target_rate: float | None = None
    seed: int = 1

    @classmethod
    def preset(cls, name: str, **overrides) -> "WorkloadSpec":
        if name == "custom":
            read = overrides.pop("read_pct", 100)
            spec = cls(name="custom", read_pct=read, update_pct=100 - read)
        else:
            (r, u, i, m, s), dist = PRESETS[name]
            spec = cls(name=name, read_pct=r, update_pct=u, insert_pct=i, rmw_pct=m,
                       scan_pct=s, distribution=dist)
        return replace(spec, **overrides)

    def mix(self) -> tuple[float, ...]:
        return (self.read_pct, self.update_pct, self.insert_pct, self.rmw_pct, self.scan_pct)


@dataclass
class ExperimentConfig:
    policy: str = "hhzs"
    workload: str = "a"
    read_pct: float | None = None
    zipf_alpha: float = 0.9
    # 1 M operations against 200 M objects, kept at the same ratio for the 200 k-object desk load
    ops: int = 1000
    target_rate: float | None = None
    seed: int = 1
    ssd_zones: int = 20
    migration_rate: float = 4 * MiB
    wal_cache_zones: int = 2
    load_bytes: int = 200 * MiB
    key_size: int = 24
    value_size: int = 1000
    sample_interval: float = 1.0
    settle: bool = True
    cpu_per_op: float = 5e-6
    out: str | None = None
    format: str = "csv"
    dump_sst: int | None = None
    hint_trace: str | None = None

    def workload_spec(self) -> WorkloadSpec:
        over = {"zipf_alpha": self.zipf_alpha, "ops": self.ops, "target_rate": self.target_rate,
                "seed": self.seed}
        if self.workload == "custom" and self.read_pct is not None:
            over["read_pct"] = self.read_pct
        return WorkloadSpec.preset(self.workload, **over)

    @property
    def record_count(self) -> int:
        return self.load_bytes // (self.key_size + self.value_size)

    def as_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {
    "policy": str, "workload": str, "read_pct": float, "zipf_alpha": float, "ops": int,
    "target_rate": float, "seed": int, "ssd_zones": int, "migration_rate": float,
    "wal_cache_zones": int, "load_bytes": int, "key_size": int, "value_size": int,
    "sample_interval": float, "settle": bool, "cpu_per_op": float, "out": str, "format": str,
    "dump_sst": int, "hint_trace": str,
}
_OPTIONAL = {"read_pct", "target_rate", "out", "dump_sst", "hint_trace"}


def validate(cfg: ExperimentConfig, lines: dict[str, int] | None = None) -> ExperimentConfig:
    lines = lines or {}

    def fail(name, msg):
        raise ConfigError(msg, name, lines.get(name))

    if cfg.policy not in POLICIES:
        fail("policy", f"unknown policy {cfg.policy!r}; expected one of {', '.join(POLICIES)}")
    if cfg.workload not in WORKLOADS:
        fail("workload", f"unknown workload {cfg.workload!r}")
    if cfg.format not in FORMATS:
        fail("format", f"unknown format {cfg.format!r}")
    if cfg.read_pct is not None and not 0 <= cfg.read_pct <= 100:
        fail("read_pct", "must be within [0, 100]")
    if cfg.zipf_alpha < 0:
        fail("zipf_alpha", "must be non-negative")
    if cfg.ops < 0:
        fail("ops", "must be non-negative")
    if cfg.target_rate is not None and cfg.target_rate <= 0:
        fail("target_rate", "must be positive")
    if cfg.ssd_zones < 2:
        fail("ssd_zones", "need at least 2 SSD zones")
    if not 0 <= cfg.wal_cache_zones < cfg.ssd_zones:
        fail("wal_cache_zones", "must leave at least one SSD zone for SSTs")
    if cfg.migration_rate <= 0:
        fail("migration_rate", "must be positive")
    if cfg.load_bytes < 0:
        fail("load_bytes", "must be non-negative")
    if cfg.key_size < 8:
        fail("key_size", "keys need at least 8 bytes")
    if cfg.value_size < 0:
        fail("value_size", "must be non-negative")
    if cfg.sample_interval <= 0:
        fail("sample_interval", "must be positive")
    spec = cfg.workload_spec()
    if abs(sum(spec.mix()) - 100) > 1e-9:
        fail("workload", "operation percentages must sum to 100")
    return cfg


def _coerce(name: str, value):
    kind = _FIELD_TYPES[name]
    if value is None:
        if name in _OPTIONAL:
            return None
        raise TypeError("may not be null")
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is bool and isinstance(value, bool):
        return value
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, (str, int)) and not isinstance(value, bool):
        return str(value)
    raise TypeError(f"expected {kind.__name__}, got {type(value).__name__}")


def config_from_mapping(data: dict, lines: dict[str, int] | None = None,
                        base: ExperimentConfig | None = None) -> ExperimentConfig:
    lines = lines or {}
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for key, value in data.items():
        name = str(key).replace("-", "_")
        if name not in known:
            raise ConfigError("unknown field", str(key), lines.get(key))
        try:
            values[name] = _coerce(name, value)
        except TypeError as exc:
            raise ConfigError(str(exc), str(key), lines.get(key)) from None
    cfg = replace(base or ExperimentConfig(), **values)
    return validate(cfg, {str(k).replace("-", "_"): v for k, v in lines.items()})


def load_config(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=None if mark is None else mark.line + 1) from None
    if node is None:
        return validate(replace(base or ExperimentConfig()))
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("top level must be a mapping", line=node.start_mark.line + 1)
    lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
    data = yaml.safe_load(text)
    return config_from_mapping(data, lines, base)
