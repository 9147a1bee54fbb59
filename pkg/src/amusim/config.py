"""Experiment configuration: defaults, YAML loading, dotted overrides.

Every field has a default, so a minimal config names only a mode and a
benchmark. The latency sweep and the mode list live under `sweep`; a run
crosses sweep.modes x sweep.latencies_ns x the one benchmark.
"""

from __future__ import annotations

import copy

import yaml

from .amu import AmuParams
from .core import CoreParams
from .machine import ALL_MODES, MachineConfig
from .memory import CacheLevelConfig, FarLinkConfig
from .runtime import RuntimeParams
from .workloads import DEFAULTS as BENCH_DEFAULTS


class ConfigError(Exception):
    pass


DEFAULT_CONFIG: dict = {
    "mode": "baseline",
    "seed": 1,
    "benchmark": {
        "name": "gups",
        # per-benchmark scale/shape knobs merge over workloads.DEFAULTS
    },
    "core": {
        "rob_entries": 512,
        "lsq_entries": 192,
        "issue_width": 6,
        "commit_width": 6,
        "coroutine_switch_cycles": 40,
    },
    "caches": {
        "l1": {"capacity_bytes": 32768, "associativity": 16,
               "hit_delay_cycles": 4, "mshr_entries": 48},
        "l2": {"capacity_bytes": 262144, "associativity": 8,
               "hit_delay_cycles": 10, "mshr_entries": 48},
    },
    "far_link": {
        "base_latency_ns": 1000.0,
        "bandwidth_bytes_per_ns": 16.0,
        "per_packet_overhead_ns": 30.0,
    },
    "memory": {
        "dram_latency_ns": 60.0,
        "spm_bytes": 65536,
        "spm_delay_cycles": 10,
        "prefetch_depth": 4,
    },
    "runtime": {
        "guard_tables": 3,
        "guard_buckets": 1024,
    },
    "sim": {
        "frequency_ghz": 3.0,
        "cycle_cap": 10_000_000_000,
    },
    "sweep": {
        "latencies_ns": [100, 200, 500, 1000, 2000, 5000],
        "modes": None,  # defaults to [mode]
    },
    "output": "results.csv",
}

_BENCH_KEYS = {
    "name", "guarded", "coroutines", "batch", "granularity", "queue_length",
    "table_words", "updates", "elements", "searches", "nodes", "lookups",
    "buckets", "build_tuples", "probes", "stream_words", "stream_scalar",
}


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    for key, value in extra.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            if path == "benchmark" and key in _BENCH_KEYS:
                base[key] = value
                continue
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, where)
        else:
            base[key] = value
    return base


def load_config(path: str | None = None, overrides: list[str] | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config root in {path} must be a mapping")
        _merge(cfg, data)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        dotted, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = cfg
        keys = dotted.split(".")
        for key in keys[:-1]:
            if key not in node or not isinstance(node[key], dict):
                raise ConfigError(f"unknown override path {dotted!r}")
            node = node[key]
        leaf = {keys[-1]: value}
        _merge(node, leaf, ".".join(keys[:-1]))
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if cfg["mode"] not in ALL_MODES:
        raise ConfigError(f"mode must be one of {ALL_MODES}, got {cfg['mode']!r}")
    name = cfg["benchmark"].get("name")
    if name not in BENCH_DEFAULTS:
        raise ConfigError(
            f"benchmark.name must be one of {sorted(BENCH_DEFAULTS)}, got {name!r}")
    modes = cfg["sweep"]["modes"]
    if modes is not None:
        for m in modes:
            if m not in ALL_MODES:
                raise ConfigError(f"sweep mode {m!r} not in {ALL_MODES}")
    for lat in cfg["sweep"]["latencies_ns"] or []:
        if lat <= 0:
            raise ConfigError(f"sweep latency {lat} must be positive")


def machine_config(cfg: dict, mode: str, latency_ns: float) -> MachineConfig:
    caches = cfg["caches"]
    memory = cfg["memory"]
    core = cfg["core"]
    return MachineConfig(
        mode=mode,
        seed=cfg["seed"],
        frequency_ghz=cfg["sim"]["frequency_ghz"],
        cycle_cap=cfg["sim"]["cycle_cap"],
        core=CoreParams(
            rob_entries=core["rob_entries"],
            lsq_entries=core["lsq_entries"],
            issue_width=core["issue_width"],
            commit_width=core["commit_width"],
            coroutine_switch_cycles=core["coroutine_switch_cycles"],
        ),
        l1=CacheLevelConfig(**caches["l1"]),
        l2=CacheLevelConfig(**caches["l2"]),
        link=FarLinkConfig(
            base_latency_ns=latency_ns,
            bandwidth_bytes_per_ns=cfg["far_link"]["bandwidth_bytes_per_ns"],
            per_packet_overhead_ns=cfg["far_link"]["per_packet_overhead_ns"],
        ),
        dram_latency_ns=memory["dram_latency_ns"],
        spm_bytes=memory["spm_bytes"],
        spm_delay_cycles=memory["spm_delay_cycles"],
        prefetch_depth=memory["prefetch_depth"],
        amu=AmuParams(),
        runtime=RuntimeParams(
            coroutine_switch_cycles=core["coroutine_switch_cycles"],
            guard_tables=cfg["runtime"]["guard_tables"],
            guard_buckets=cfg["runtime"]["guard_buckets"],
        ),
    )


def benchmark_overrides(cfg: dict) -> dict:
    return {k: v for k, v in cfg["benchmark"].items() if k != "name"}
