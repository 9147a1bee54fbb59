"""Timing and functional models for the memory system.

Functional state (what bytes live where) is kept in MemoryImage and the
scratchpad bytearray, updated in program order by whoever performs the
access. The caches, MSHR pools and the far link are timing-only: they
decide *when* an access completes, never what it returns. That split keeps
the simulated machine functionally sequentially consistent within the one
core this simulator models.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import SimulationError, Simulator

LINE_BYTES = 64

REGION_LOCAL = "local"
REGION_FAR = "far"


class MemoryFault(SimulationError):
    """Access outside any mapped region, or out of the scratchpad range."""


# ---------------------------------------------------------------------------
# Functional backing store


class MemoryImage:
    """Sparse byte-addressable memory with disjoint region tags."""

    PAGE = 4096

    def __init__(self):
        self._pages: dict[int, bytearray] = {}
        self._regions: list[tuple[int, int, str]] = []  # (start, end, kind)

    def add_region(self, start: int, size: int, kind: str) -> None:
        end = start + size
        for s, e, k in self._regions:
            if start < e and s < end:
                raise MemoryFault(f"region [{start:#x},{end:#x}) overlaps {k}")
        self._regions.append((start, end, kind))
        self._regions.sort()

    def region_of(self, addr: int) -> str:
        for s, e, k in self._regions:
            if s <= addr < e:
                return k
        raise MemoryFault(f"unmapped address {addr:#x}")

    def check_range(self, addr: int, size: int) -> str:
        kind = self.region_of(addr)
        if size > 0 and self.region_of(addr + size - 1) != kind:
            raise MemoryFault(f"access [{addr:#x},+{size}) crosses regions")
        return kind

    def read(self, addr: int, size: int) -> bytes:
        out = bytearray(size)
        pos = 0
        while pos < size:
            page, off = divmod(addr + pos, self.PAGE)
            chunk = min(size - pos, self.PAGE - off)
            data = self._pages.get(page)
            if data is not None:
                out[pos : pos + chunk] = data[off : off + chunk]
            pos += chunk
        return bytes(out)

    def write(self, addr: int, data: bytes) -> None:
        size = len(data)
        pos = 0
        while pos < size:
            page, off = divmod(addr + pos, self.PAGE)
            chunk = min(size - pos, self.PAGE - off)
            buf = self._pages.get(page)
            if buf is None:
                buf = self._pages[page] = bytearray(self.PAGE)
            buf[off : off + chunk] = data[pos : pos + chunk]
            pos += chunk

    def read_u64(self, addr: int) -> int:
        return int.from_bytes(self.read(addr, 8), "little")

    def write_u64(self, addr: int, value: int) -> None:
        self.write(addr, (value & (2**64 - 1)).to_bytes(8, "little"))


# ---------------------------------------------------------------------------
# Timing structures


@dataclass
class CacheLevelConfig:
    capacity_bytes: int
    associativity: int
    hit_delay_cycles: int
    mshr_entries: int
    line_bytes: int = LINE_BYTES

    def __post_init__(self):
        if self.capacity_bytes % (self.line_bytes * self.associativity):
            raise SimulationError(
                "cache capacity must be a multiple of line_bytes * associativity"
            )
        if self.mshr_entries < 1:
            raise SimulationError("mshr_entries must be >= 1")

    @property
    def num_sets(self) -> int:
        return self.capacity_bytes // (self.line_bytes * self.associativity)


class CacheLevel:
    """Set-associative LRU tag array. Tags only; data lives in MemoryImage."""

    def __init__(self, cfg: CacheLevelConfig, name: str):
        self.cfg = cfg
        self.name = name
        # per-set dict keyed by line address; dict order is LRU order
        self._sets: list[dict[int, None]] = [{} for _ in range(cfg.num_sets)]

    def _set_for(self, line_addr: int) -> dict[int, None]:
        return self._sets[(line_addr // self.cfg.line_bytes) % self.cfg.num_sets]

    def lookup(self, line_addr: int) -> bool:
        s = self._set_for(line_addr)
        if line_addr in s:
            del s[line_addr]  # move to MRU position
            s[line_addr] = None
            return True
        return False

    def contains(self, line_addr: int) -> bool:
        return line_addr in self._set_for(line_addr)

    def fill(self, line_addr: int) -> None:
        s = self._set_for(line_addr)
        if line_addr in s:
            del s[line_addr]
        elif len(s) >= self.cfg.associativity:
            del s[next(iter(s))]  # evict LRU; writebacks not timed (no coherence)
        s[line_addr] = None


class MshrPool:
    """Bounded outstanding-miss tracker with FIFO waiters.

    A missed access holds exactly one entry from miss issue until the fill
    completes; when the pool is exhausted newcomers queue (that queueing is
    a stall, not an error).
    """

    def __init__(self, capacity: int, name: str):
        self.capacity = capacity
        self.name = name
        self.in_use = 0
        self.peak = 0
        self.waiters: deque = deque()

    def acquire(self, fn) -> None:
        """Run fn once an entry is held (immediately if one is free)."""
        if self.in_use < self.capacity:
            self.in_use += 1
            self.peak = max(self.peak, self.in_use)
            fn()
        else:
            self.waiters.append(fn)

    def release(self) -> None:
        if self.in_use <= 0:
            raise SimulationError(f"{self.name}: MSHR release underflow")
        if self.waiters:
            # hand the entry straight to the oldest waiter; occupancy unchanged
            self.waiters.popleft()()
        else:
            self.in_use -= 1


@dataclass
class FarLinkConfig:
    base_latency_ns: float = 1000.0
    bandwidth_bytes_per_ns: float = 16.0  # 0 or negative means unlimited
    per_packet_overhead_ns: float = 30.0


class FarLink:
    """Serial link to far memory.

    Packet service time = base_latency + per_packet_overhead +
    payload/bandwidth. Base latency and overhead are pipelined; only
    payload transmission serializes, so a saturated link spreads
    completions by transmission time.
    """

    def __init__(self, sim: Simulator, cfg: FarLinkConfig):
        self.sim = sim
        self.cfg = cfg
        clock = sim.clock
        self.base_cycles = clock.ns_to_cycles(cfg.base_latency_ns + cfg.per_packet_overhead_ns)
        self._port_free = 0
        self.packets_sent = 0

    def tx_cycles(self, payload_bytes: int) -> int:
        bw = self.cfg.bandwidth_bytes_per_ns
        if bw <= 0:
            return 0
        return self.sim.clock.ns_to_cycles(payload_bytes / bw)

    def send(self, payload_bytes: int, on_complete) -> int:
        """Queue one packet; returns its completion cycle."""
        if payload_bytes <= 0:
            raise MemoryFault("far packet with empty payload")
        now = self.sim.clock.now
        start = max(now, self._port_free)
        tx = self.tx_cycles(payload_bytes)
        self._port_free = start + tx
        done = start + tx + self.base_cycles
        self.packets_sent += 1
        self.sim.stats.record_inflight_delta(1)
        self.sim.schedule(done - now, lambda: self._finish(on_complete), "link")
        return done

    def _finish(self, on_complete) -> None:
        self.sim.stats.record_inflight_delta(-1)
        on_complete()


class StreamPrefetcher:
    """Next-N-line stream prefetcher (approximates a best-offset prefetcher
    on sequential workloads; used by the beefed-up baseline configuration)."""

    def __init__(self, depth: int = 4):
        self.depth = depth
        self.issued = 0


# ---------------------------------------------------------------------------
# The hierarchy


@dataclass
class HierarchyConfig:
    l1: CacheLevelConfig
    l2: CacheLevelConfig
    dram_latency_ns: float = 60.0
    spm_bytes: int = 65536
    spm_delay_cycles: int = 10
    prefetch_depth: int = 0  # 0 disables the stream prefetcher


class MemoryHierarchy:
    """L1/L2 with finite MSHRs over local DRAM and the far link, plus the
    scratchpad partition. Serves synchronous core traffic and the
    controller's cache-bypassing far requests."""

    def __init__(self, sim: Simulator, image: MemoryImage, cfg: HierarchyConfig, link: FarLink):
        self.sim = sim
        self.image = image
        self.cfg = cfg
        self.link = link
        self.l1 = CacheLevel(cfg.l1, "l1")
        self.l2 = CacheLevel(cfg.l2, "l2")
        self.l1_mshr = MshrPool(cfg.l1.mshr_entries, "l1")
        self.l2_mshr = MshrPool(cfg.l2.mshr_entries, "l2")
        self.dram_cycles = sim.clock.ns_to_cycles(cfg.dram_latency_ns)
        self.spm = bytearray(cfg.spm_bytes)
        self.prefetcher = StreamPrefetcher(cfg.prefetch_depth) if cfg.prefetch_depth else None
        # line address -> list of callbacks waiting on the in-flight fill
        self._pending_fills: dict[int, list] = {}
        self.accesses = 0
        self.l1_hits = 0

    # -- synchronous path (core loads/stores) --------------------------------

    def sync_access(self, addr: int, size: int, kind: str, on_complete) -> None:
        """Timing walk for one load/store of at most a cache line."""
        line = addr - addr % LINE_BYTES
        if size <= 0 or (addr + size - 1) - (addr + size - 1) % LINE_BYTES != line:
            raise MemoryFault(f"sync access [{addr:#x},+{size}) is not line-contained")
        region = self.image.check_range(addr, size)
        self.accesses += 1
        if self.l1.lookup(line):
            self.l1_hits += 1
            self.sim.schedule(self.cfg.l1.hit_delay_cycles, on_complete, "l1hit")
            return
        waiters = self._pending_fills.get(line)
        if waiters is not None:
            waiters.append(on_complete)  # merge with in-flight miss, no new MSHR
            return
        self._pending_fills[line] = [on_complete]
        self.l1_mshr.acquire(lambda: self._l1_missed(line, region))

    def _l1_missed(self, line: int, region: str) -> None:
        delay = self.cfg.l1.hit_delay_cycles
        if self.l2.lookup(line):
            self.sim.schedule(delay + self.cfg.l2.hit_delay_cycles,
                              lambda: self._fill(line, l2_held=False), "l2hit")
        else:
            self.sim.schedule(delay, lambda: self.l2_mshr.acquire(
                lambda: self._l2_missed(line, region)), "l1miss")

    def _l2_missed(self, line: int, region: str) -> None:
        self._maybe_prefetch(line, region)
        lookup = self.cfg.l2.hit_delay_cycles
        if region == REGION_FAR:
            self.sim.schedule(lookup, lambda: self.link.send(
                LINE_BYTES, lambda: self._fill(line, l2_held=True)), "l2miss-far")
        else:
            self.sim.schedule(lookup + self.dram_cycles,
                              lambda: self._fill(line, l2_held=True), "l2miss-dram")

    def _fill(self, line: int, l2_held: bool) -> None:
        self.l2.fill(line)
        self.l1.fill(line)
        if l2_held:
            self.l2_mshr.release()
        self.l1_mshr.release()
        for cb in self._pending_fills.pop(line, ()):
            cb()

    # -- prefetcher -----------------------------------------------------------

    def _maybe_prefetch(self, line: int, region: str) -> None:
        pf = self.prefetcher
        if pf is None:
            return
        for i in range(1, pf.depth + 1):
            nxt = line + i * LINE_BYTES
            try:
                if self.image.region_of(nxt) != region:
                    break
            except MemoryFault:
                break
            if self.l2.contains(nxt) or nxt in self._pending_fills:
                continue
            # prefetches take MSHRs only when free; they never queue
            if (self.l1_mshr.in_use >= self.l1_mshr.capacity
                    or self.l2_mshr.in_use >= self.l2_mshr.capacity):
                break
            self._pending_fills[nxt] = []
            pf.issued += 1
            self.l1_mshr.acquire(lambda: None)
            self.l2_mshr.acquire(lambda n=nxt: self._prefetch_issue(n, region))

    def _prefetch_issue(self, line: int, region: str) -> None:
        if region == REGION_FAR:
            self.link.send(LINE_BYTES, lambda: self._fill(line, l2_held=True))
        else:
            self.sim.schedule(self.dram_cycles, lambda: self._fill(line, l2_held=True), "pf-dram")

    # -- controller path (bypasses caches and their MSHRs) --------------------

    def far_request(self, addr: int, size: int, on_complete) -> int:
        if size <= 0:
            raise MemoryFault("far request with zero size")
        if self.image.check_range(addr, size) != REGION_FAR:
            raise MemoryFault(f"far request outside far region: {addr:#x}")
        return self.link.send(size, on_complete)

    # -- scratchpad ------------------------------------------------------------

    def check_spm_range(self, offset: int, size: int) -> None:
        if offset < 0 or size < 0 or offset + size > self.cfg.spm_bytes:
            raise MemoryFault(f"SPM access [{offset:#x},+{size}) out of range")

    def spm_access(self, offset: int, size: int, on_complete) -> None:
        """Fixed L2-class delay; never misses, never takes an MSHR."""
        self.check_spm_range(offset, size)
        self.sim.schedule(self.cfg.spm_delay_cycles, on_complete, "spm")

    def spm_read(self, offset: int, size: int) -> bytes:
        self.check_spm_range(offset, size)
        return bytes(self.spm[offset : offset + size])

    def spm_write(self, offset: int, data: bytes) -> None:
        self.check_spm_range(offset, len(data))
        self.spm[offset : offset + len(data)] = data

    def spm_read_u64(self, offset: int) -> int:
        return int.from_bytes(self.spm_read(offset, 8), "little")

    def spm_write_u64(self, offset: int, value: int) -> None:
        self.spm_write(offset, (value & (2**64 - 1)).to_bytes(8, "little"))
