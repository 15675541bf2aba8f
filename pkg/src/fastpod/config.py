"""Run configuration: a single JSON document, validated up front, echoed
verbatim into every run's output directory for reproducibility."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

SCHEMES = ("fastpod", "fastpod_no_opt", "fastpass_mode")


class ConfigError(ValueError):
    pass


@dataclass
class TopologyConfig:
    k: int = 8
    link_rate_bps: int = 100_000_000_000
    prop_delay_ps: int = 1_000_000


@dataclass
class LayoutConfig:
    data_cell_bytes: int = 1500
    ctrl_cell_bytes: int = 64
    guard_slot_ps: int = 1000
    guard_ctrl_ps: int = 1000


@dataclass
class WorkloadConfig:
    load: float = 0.5
    n_flows: int = 10000
    seed: int = 1
    cdf_file: str | None = None   # None -> bundled distribution


@dataclass
class ArbiterConfig:
    process_ps: int | None = None   # None -> one slot duration
    extra_pipeline_slots: int = 0


@dataclass
class SwitchConfig:
    cut_through_ps: int = 0
    buffer_bytes: int = 4_194_304
    strict: bool = True


@dataclass
class ClockConfig:
    enabled: bool = False
    max_offset_ps: int = 0
    drift_ppm: float = 0.0
    sync: bool = True


@dataclass
class FaultSpec:
    src: str = ""
    dst: str = ""
    at_ps: int = 0


@dataclass
class DebugConfig:
    trace_events: bool = False
    allocation_log: bool = False
    schd_log: bool = False
    topology_json: bool = False
    dump_flows: bool = False


@dataclass
class RunConfig:
    scheme: str = "fastpod"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    arbiter: ArbiterConfig = field(default_factory=ArbiterConfig)
    switch: SwitchConfig = field(default_factory=SwitchConfig)
    clock: ClockConfig = field(default_factory=ClockConfig)
    faults: list = field(default_factory=list)
    debug: DebugConfig = field(default_factory=DebugConfig)
    audit_mode: str = "online"
    run_cap_multiplier: float = 50.0
    short_flow_bytes: int = 10000

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        t = self.topology
        if t.k < 4 or t.k % 2:
            raise ConfigError(f"topology.k must be even and >= 4, got {t.k}")
        if t.link_rate_bps <= 0 or t.prop_delay_ps < 0:
            raise ConfigError("bad link rate or propagation delay")
        lay = self.layout
        if 2 * lay.ctrl_cell_bytes >= lay.data_cell_bytes:
            raise ConfigError("two control cells must be smaller than one data cell")
        if lay.guard_slot_ps < 0 or lay.guard_ctrl_ps < 0:
            raise ConfigError("guard bands must be non-negative")
        w = self.workload
        if not 0 < w.load:
            raise ConfigError(f"workload.load must be positive, got {w.load}")
        if w.n_flows < 1:
            raise ConfigError("workload.n_flows must be >= 1")
        if self.audit_mode not in ("online", "full"):
            raise ConfigError(f"audit_mode must be online or full, got {self.audit_mode}")
        if self.run_cap_multiplier <= 0:
            raise ConfigError("run_cap_multiplier must be positive")
        a = self.arbiter
        if a.process_ps is not None and a.process_ps < 0:
            raise ConfigError("arbiter.process_ps must be non-negative")
        for f in self.faults:
            if not f.src or not f.dst or f.at_ps < 0:
                raise ConfigError(f"bad fault spec {f}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def copy(self) -> "RunConfig":
        return copy.deepcopy(self)


_SECTIONS = {
    "topology": TopologyConfig,
    "layout": LayoutConfig,
    "workload": WorkloadConfig,
    "arbiter": ArbiterConfig,
    "switch": SwitchConfig,
    "clock": ClockConfig,
    "debug": DebugConfig,
}


def config_from_dict(doc: dict) -> RunConfig:
    doc = dict(doc)
    cfg = RunConfig()
    for name, cls in _SECTIONS.items():
        section = doc.pop(name, None)
        if section is not None:
            if not isinstance(section, dict):
                raise ConfigError(f"{name} must be an object")
            known = {f for f in cls.__dataclass_fields__}
            extra = set(section) - known
            if extra:
                raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
            setattr(cfg, name, cls(**section))
    faults = doc.pop("faults", [])
    cfg.faults = [FaultSpec(**f) for f in faults]
    for key in ("scheme", "audit_mode", "run_cap_multiplier", "short_flow_bytes"):
        if key in doc:
            setattr(cfg, key, doc.pop(key))
    if doc:
        raise ConfigError(f"unknown top-level keys: {sorted(doc)}")
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply 'dotted.key=value' overrides; values parse as JSON else string."""
    doc = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown config section {p!r} in {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return config_from_dict(doc)
