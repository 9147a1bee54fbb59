"""Per-run assembly of simulator, memory system, AMU, runtime and core."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .amu import AmuParams, AmuSystem
from .core import BaselineFeed, CoreParams, OooCore
from .engine import DEFAULT_CYCLE_CAP, Simulator
from .memory import (CacheLevelConfig, FarLink, FarLinkConfig, HierarchyConfig,
                     MemoryHierarchy, MemoryImage, REGION_FAR, REGION_LOCAL)
from .runtime import Runtime, RuntimeParams
from .workloads import FAR_BASE, LOCAL_BASE, Workload

AMU_MODES = ("amu", "amu_dma")
ALL_MODES = ("baseline", "cxl_ideal", "amu", "amu_dma")


def _default_l1() -> CacheLevelConfig:
    return CacheLevelConfig(capacity_bytes=32768, associativity=16,
                            hit_delay_cycles=4, mshr_entries=48)


def _default_l2() -> CacheLevelConfig:
    return CacheLevelConfig(capacity_bytes=262144, associativity=8,
                            hit_delay_cycles=10, mshr_entries=48)


@dataclass
class MachineConfig:
    mode: str = "baseline"
    seed: int = 1
    frequency_ghz: float = 3.0
    cycle_cap: int = DEFAULT_CYCLE_CAP
    trace_events: bool = False
    core: CoreParams = field(default_factory=CoreParams)
    l1: CacheLevelConfig = field(default_factory=_default_l1)
    l2: CacheLevelConfig = field(default_factory=_default_l2)
    link: FarLinkConfig = field(default_factory=FarLinkConfig)
    dram_latency_ns: float = 60.0
    spm_bytes: int = 65536
    spm_delay_cycles: int = 10
    prefetch_depth: int = 4  # used only by cxl_ideal
    amu: AmuParams = field(default_factory=AmuParams)
    runtime: RuntimeParams = field(default_factory=RuntimeParams)

    def resolved(self) -> "MachineConfig":
        """Apply the per-mode structural presets."""
        if self.mode not in ALL_MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {ALL_MODES}")
        cfg = replace(self)
        if cfg.mode == "cxl_ideal":
            cfg.l1 = replace(cfg.l1, mshr_entries=256)
            cfg.l2 = replace(cfg.l2, mshr_entries=256)
        else:
            cfg.prefetch_depth = 0
        if cfg.mode == "amu_dma":
            cfg.amu = replace(cfg.amu, dma_mode=True)
        return cfg


class Machine:
    """One isolated simulation instance executing one workload variant."""

    def __init__(self, cfg: MachineConfig, workload: Workload):
        cfg = cfg.resolved()
        self.cfg = cfg
        self.workload = workload
        self.sim = Simulator(seed=cfg.seed, frequency_ghz=cfg.frequency_ghz,
                             cycle_cap=cfg.cycle_cap, trace_events=cfg.trace_events)
        self.image = MemoryImage()
        guard_bytes = cfg.runtime.guard_tables * cfg.runtime.guard_buckets * 16
        local_bytes = max(workload.local_bytes, guard_bytes + 4096)
        self.image.add_region(LOCAL_BASE, _page_round(local_bytes), REGION_LOCAL)
        self.image.add_region(FAR_BASE, _page_round(workload.far_bytes + 64), REGION_FAR)
        self.link = FarLink(self.sim, cfg.link)
        hcfg = HierarchyConfig(
            l1=cfg.l1, l2=cfg.l2, dram_latency_ns=cfg.dram_latency_ns,
            spm_bytes=cfg.spm_bytes, spm_delay_cycles=cfg.spm_delay_cycles,
            prefetch_depth=cfg.prefetch_depth)
        self.hier = MemoryHierarchy(self.sim, self.image, hcfg, self.link)
        self.amu: AmuSystem | None = None
        self.runtime: Runtime | None = None
        workload.prepare(self)
        if cfg.mode in AMU_MODES:
            self.amu = AmuSystem(self.sim, self.hier, cfg.amu)
            rparams = replace(cfg.runtime, guard_base_addr=LOCAL_BASE)
            self.runtime = Runtime(self.sim, self.amu, rparams)
            workload.configure_amu(self)
            feed = self.runtime
        else:
            feed = BaselineFeed(workload.baseline_records(self))
        self.core = OooCore(self.sim, cfg.core, self.hier, feed)
        if self.runtime is not None:
            self.runtime.attach_core(self.core)
            workload.spawn_tasks(self)

    def run(self) -> dict:
        """Execute to completion; returns the metrics row for this run."""
        self.core.start()
        final = self.sim.run_until_idle()
        ok, detail = self.workload.verify(self)
        stats = self.sim.stats
        row = {
            "mode": self.cfg.mode,
            "benchmark": self.workload.spec.name,
            "latency_ns": self.cfg.link.base_latency_ns,
            "seed": self.cfg.seed,
            "exec_cycles": final,
            "mlp": stats.mlp(busy_cycles=final),
            "ipc": (stats.committed_instructions / final) if final else 0.0,
            "asmc_messages": stats.counters.get("asmc_messages", 0),
            "guard_time_fraction": (self.core.guard_cycles / final) if final else 0.0,
            "verify": ok,
            "verify_detail": detail,
            "committed": stats.committed_instructions,
            "counters": dict(stats.counters),
        }
        if self.runtime is not None:
            row["switches"] = self.runtime.switches
            row["suspensions"] = self.runtime.suspensions
            row["loop_turns"] = self.runtime.loop_turns
            row["alloc_retries"] = self.runtime.alloc_retries
            row["guard_hits"] = self.runtime.guard_hits
            row["guard_misses"] = self.runtime.guard_misses
        return row


def _page_round(n: int) -> int:
    return (n + 4095) & ~4095
