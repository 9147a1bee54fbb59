"""Asynchronous memory access unit: pipeline-side ALSU and L2-side ASMC.

The ALSU executes the asynchronous-access micro-ops (ID allocation,
request issue, completion polling) against a pair of 512-bit list vector
registers that batch 16-bit request IDs, with uncommitted-ID checkpoint
registers so speculatively fetched batches survive pipeline squashes.

The ASMC owns the scratchpad metadata area: the per-request table (one
16-byte entry per ID), and the free/finished ID rings, both materialized
in SPM bytes with a small on-controller register cache in front of each
ring. It splits each request into line-sized sub-requests on the far link.

Request ID 0 is the failure sentinel and is never allocated. Every ID in
1..queue_length is, at all times, in exactly one place: the ASMC free
ring, the ASMC finished ring, the request table, an ALSU buffer, or the
hands of software (between allocation and issue delivery, or between a
successful poll and release). The IdTracker enforces that partition on
every transition.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .engine import SimulationError, Simulator
from .memory import LINE_BYTES, REGION_FAR, MemoryHierarchy

ID_FAIL = 0

AMART_ENTRY_BYTES = 16
RING_SLOT_BYTES = 2

ST_IDLE = 0
ST_ISSUED = 1
ST_INFLIGHT = 2
ST_DONE = 3

# canonical ID locations for the conservation audit
LOC_ASMC_FREE = 0
LOC_ASMC_FIN = 1
LOC_AMART = 2
LOC_ALSU_FREE = 3
LOC_ALSU_FIN = 4
LOC_SOFTWARE = 5

LOC_NAMES = ("asmc_free", "asmc_finished", "amart", "alsu_free", "alsu_finished", "software")


class AmuFault(SimulationError):
    """Configuration fault or internal AMU invariant violation."""


@dataclass
class AmuParams:
    lvr_id_capacity: int = 31      # IDs one list vector register can buffer
    uncommitted_registers: int = 2
    hop_cycles: int = 10           # one ALSU<->ASMC traversal (L2-class port)
    list_register_cache: int = 32  # on-controller cache depth per ID ring
    dma_mode: bool = False         # capacity 1, non-speculative ID micro-ops
    speculative_ids: bool = True

    def effective(self) -> "AmuParams":
        if self.dma_mode:
            return AmuParams(
                lvr_id_capacity=1,
                uncommitted_registers=self.uncommitted_registers,
                hop_cycles=self.hop_cycles,
                list_register_cache=self.list_register_cache,
                dma_mode=True,
                speculative_ids=False,
            )
        return self


class IdTracker:
    """O(1) per-transition audit that no ID is ever lost or duplicated."""

    def __init__(self, queue_length: int):
        self.queue_length = queue_length
        self.loc = [LOC_ASMC_FREE] * (queue_length + 1)
        self.counts = [queue_length, 0, 0, 0, 0, 0]

    def move(self, rid: int, src: int, dst: int) -> None:
        if not 1 <= rid <= self.queue_length:
            raise AmuFault(f"id {rid} outside 1..{self.queue_length}")
        if self.loc[rid] != src:
            raise AmuFault(
                f"id {rid} moved from {LOC_NAMES[src]} but lives in {LOC_NAMES[self.loc[rid]]}"
            )
        self.loc[rid] = dst
        self.counts[src] -= 1
        self.counts[dst] += 1

    def audit(self, sets: dict[int, list[int]]) -> None:
        """Full partition check against the actual structures."""
        seen = {}
        for loc, ids in sets.items():
            for rid in ids:
                if rid in seen:
                    raise AmuFault(
                        f"id {rid} duplicated: {LOC_NAMES[seen[rid]]} and {LOC_NAMES[loc]}"
                    )
                seen[rid] = loc
                if self.loc[rid] != loc:
                    raise AmuFault(
                        f"id {rid} tracked in {LOC_NAMES[self.loc[rid]]} but found in {LOC_NAMES[loc]}"
                    )
        if len(seen) != self.queue_length:
            missing = set(range(1, self.queue_length + 1)) - seen.keys()
            raise AmuFault(f"ids lost: {sorted(missing)[:8]}...")


class ListVectorRegister:
    """512-bit batching buffer: pointer lane plus up to 31 stored IDs.

    Lanes 1..31 hold IDs; the pointer names the next unused lane, so
    pointer == 32 means empty and pointer == 32 - len means len IDs held.
    """

    def __init__(self, id_capacity: int = 31):
        self.id_capacity = id_capacity
        self._ids: list[int] = []

    @property
    def pointer(self) -> int:
        return 32 - len(self._ids)

    def __len__(self) -> int:
        return len(self._ids)

    def is_full(self) -> bool:
        return len(self._ids) >= self.id_capacity

    def push(self, rid: int) -> None:
        if self.is_full():
            raise AmuFault("list vector register overflow")
        self._ids.append(rid)

    def pop(self) -> int:
        return self._ids.pop()

    def fill(self, ids: list[int]) -> None:
        if len(ids) > self.id_capacity:
            raise AmuFault("batch larger than list vector register")
        self._ids = list(ids)

    def drain(self) -> list[int]:
        ids, self._ids = self._ids, []
        return ids

    def contents(self) -> list[int]:
        return list(self._ids)


class UncommittedIdRegister:
    """Checkpoint of one speculative batch fetch; cleared at commit."""

    __slots__ = ("occupied", "ids", "tag", "redrawable")

    def __init__(self):
        self.occupied = False
        self.ids: list[int] = []
        self.tag = None
        self.redrawable = False

    def load(self, ids: list[int], tag) -> None:
        self.occupied = True
        self.ids = list(ids)
        self.tag = tag
        self.redrawable = False

    def clear(self) -> None:
        self.occupied = False
        self.ids = []
        self.tag = None
        self.redrawable = False


class SpmIdRing:
    """Circular 16-bit ID queue materialized in SPM bytes, fronted by a
    small on-controller register cache. The cache is a timing refinement:
    IDs in it still belong to the ring's audit category."""

    def __init__(self, hier: MemoryHierarchy, base: int, capacity: int, cache_depth: int):
        self.hier = hier
        self.base = base
        self.capacity = capacity
        self.cache_depth = cache_depth
        self.cache: list[int] = []
        self.head = 0  # SPM ring read index
        self.count = 0  # IDs stored in SPM (excludes cache)
        self.spm_ops = 0

    def __len__(self) -> int:
        return self.count + len(self.cache)

    def _slot(self, index: int) -> int:
        return self.base + (index % self.capacity) * RING_SLOT_BYTES

    def _ring_push(self, rid: int) -> None:
        if self.count >= self.capacity:
            raise AmuFault("ID ring overflow")
        off = self._slot(self.head + self.count)
        self.hier.spm[off : off + 2] = rid.to_bytes(2, "little")
        self.count += 1

    def _ring_pop(self) -> int:
        off = self._slot(self.head)
        rid = int.from_bytes(self.hier.spm[off : off + 2], "little")
        self.head += 1
        self.count -= 1
        return rid

    def push(self, rid: int) -> int:
        """Returns extra SPM cycles incurred (0 on a register-cache hit)."""
        if len(self.cache) < self.cache_depth:
            self.cache.append(rid)
            return 0
        # spill the oldest cached half to SPM, keep the rest register-resident
        spill = len(self.cache) // 2 or 1
        for old in self.cache[:spill]:
            self._ring_push(old)
        del self.cache[:spill]
        self.cache.append(rid)
        self.spm_ops += 1
        return self.hier.cfg.spm_delay_cycles

    def pop_batch(self, maxn: int) -> tuple[list[int], int]:
        extra = 0
        if not self.cache and self.count:
            refill = min(self.cache_depth, self.count)
            self.cache = [self._ring_pop() for _ in range(refill)]
            self.spm_ops += 1
            extra = self.hier.cfg.spm_delay_cycles
        take = min(maxn, len(self.cache))
        ids = self.cache[:take]
        del self.cache[:take]
        if take < maxn and self.count:
            more, extra2 = self.pop_batch(maxn - take)
            ids += more
            extra += extra2
        return ids, extra

    def contents(self) -> list[int]:
        ring = []
        for i in range(self.count):
            off = self._slot(self.head + i)
            ring.append(int.from_bytes(self.hier.spm[off : off + 2], "little"))
        return self.cache + ring


@dataclass
class AmiResult:
    """What one ID micro-op produced: architectural value plus its timing."""

    value: int
    cycles: int
    serialize: bool = False
    fetched: bool = False  # a batch fetch round trip happened


class AmuSystem:
    """ALSU + ASMC pair bound to one simulator and memory hierarchy."""

    def __init__(self, sim: Simulator, hier: MemoryHierarchy, params: AmuParams | None = None):
        self.sim = sim
        self.hier = hier
        self.params = (params or AmuParams()).effective()
        self.granularity = 8
        self.queue_base = 0
        self.queue_length = 0
        self.tracker: IdTracker | None = None
        self.free_lvr = ListVectorRegister(self.params.lvr_id_capacity)
        self.fin_lvr = ListVectorRegister(self.params.lvr_id_capacity)
        self.uncommitted = [UncommittedIdRegister() for _ in range(self.params.uncommitted_registers)]
        self.free_ring: SpmIdRing | None = None
        self.fin_ring: SpmIdRing | None = None
        self._amart: list | None = None  # mirror: [spm_addr, mem_addr, kind, status, total, done]
        self.outstanding = 0  # issued-but-not-finished requests
        self.software_held = 0
        self.finished_listeners: list = []
        self._pending_issues: dict = {}  # tag -> (kind, rid, spm_addr, mem_addr)
        # speculation fault injection (tests / fuzz mode)
        self.inject_squash_probability = 0.0
        self._audit_hook = None

    # -- configuration registers ----------------------------------------------

    def metadata_bytes(self, queue_length: int) -> int:
        return queue_length * (AMART_ENTRY_BYTES + 2 * RING_SLOT_BYTES)

    @property
    def metadata_end(self) -> int:
        return self.queue_base + self.metadata_bytes(self.queue_length)

    @property
    def data_area(self) -> tuple[int, int]:
        return self.metadata_end, self.hier.cfg.spm_bytes

    def cfg_write(self, reg: str, value: int) -> int:
        """Returns the micro-op latency in cycles."""
        spm_size = self.hier.cfg.spm_bytes
        if reg == "granularity":
            if not 1 <= value <= spm_size:
                raise AmuFault(f"granularity {value} outside 1..{spm_size}")
            self.granularity = value
        elif reg in ("queue_base", "queue_length"):
            if self.outstanding or self.software_held:
                raise AmuFault(f"cfg write to {reg} with requests outstanding")
            if reg == "queue_base":
                base, length = value, self.queue_length
            else:
                base, length = self.queue_base, value
                if not 1 <= length <= 65535:
                    raise AmuFault(f"queue_length {length} outside 1..65535")
            if base < 0 or base + self.metadata_bytes(length) > spm_size:
                raise AmuFault(
                    f"metadata area [{base},+{self.metadata_bytes(length)}) exceeds SPM {spm_size}"
                )
            self.queue_base = base
            self.queue_length = length
            if reg == "queue_length":
                self._init_metadata()
        else:
            raise AmuFault(f"unknown config register {reg}")
        return 2 * self.params.hop_cycles

    def cfg_read(self, reg: str) -> int:
        try:
            return {"granularity": self.granularity,
                    "queue_base": self.queue_base,
                    "queue_length": self.queue_length}[reg]
        except KeyError:
            raise AmuFault(f"unknown config register {reg}") from None

    def _init_metadata(self) -> None:
        q = self.queue_length
        self.tracker = IdTracker(q)
        amart_base = self.queue_base
        free_base = amart_base + q * AMART_ENTRY_BYTES
        fin_base = free_base + q * RING_SLOT_BYTES
        cache = self.params.list_register_cache
        self.free_ring = SpmIdRing(self.hier, free_base, q, cache)
        self.fin_ring = SpmIdRing(self.hier, fin_base, q, cache)
        self._amart = [None] * (q + 1)
        zero = bytes(AMART_ENTRY_BYTES)
        for rid in range(1, q + 1):
            self._amart[rid] = [0, 0, 0, ST_IDLE, 0, 0]
            self.hier.spm_write(amart_base + (rid - 1) * AMART_ENTRY_BYTES, zero)
            self.free_ring.push(rid)
        self.free_lvr.fill([])
        self.fin_lvr.fill([])
        for reg in self.uncommitted:
            reg.clear()
        self.outstanding = 0
        self.software_held = 0

    # -- AMART persistence ------------------------------------------------------

    def _amart_store(self, rid: int) -> None:
        spm_addr, mem_addr, kind, status, total, done = self._amart[rid]
        off = self.queue_base + (rid - 1) * AMART_ENTRY_BYTES
        struct.pack_into("<IQBBBB", self.hier.spm, off,
                         spm_addr, mem_addr, kind, status, total, done)

    def amart_entry(self, rid: int) -> tuple:
        """Decode the entry straight from SPM bytes (tests peek here)."""
        off = self.queue_base + (rid - 1) * AMART_ENTRY_BYTES
        return struct.unpack_from("<IQBBBB", self.hier.spm, off)

    # -- ALSU micro-ops ----------------------------------------------------------

    def _require_ready(self) -> None:
        if self.tracker is None:
            raise AmuFault("queue_length not configured")

    def _acquire_uncommitted(self, tag) -> tuple[UncommittedIdRegister, bool]:
        for reg in self.uncommitted:
            if not reg.occupied:
                return reg, False
        # all busy: a further fetch must stall until the previous one commits;
        # by the time this micro-op executes (serialized) that has happened,
        # so reuse a plain checkpoint. Squash checkpoints hold live IDs and
        # must never be evicted.
        for reg in self.uncommitted:
            if not reg.redrawable:
                reg.clear()
                return reg, True
        raise AmuFault("all uncommitted ID registers hold squash checkpoints")

    def _refill(self, lvr: ListVectorRegister, fetch, tag) -> AmiResult:
        """Shared refill path for both ID channels. Returns timing only; the
        fetched IDs land in lvr."""
        hop2 = 2 * self.params.hop_cycles
        for reg in self.uncommitted:
            if reg.occupied and reg.redrawable and reg.tag[0] == id(lvr):
                lvr.fill(reg.ids)
                reg.redrawable = False
                reg.tag = (id(lvr), tag)
                return AmiResult(0, 1, fetched=False)
        ids, extra = fetch(lvr.id_capacity)
        self.sim.stats.bump("asmc_messages")
        self.sim.stats.bump("batch_fetches")
        if not ids:
            return AmiResult(0, hop2 + extra, fetched=True)
        lvr.fill(ids)
        serialize = False
        if self.params.speculative_ids:
            reg, serialize = self._acquire_uncommitted(tag)
            reg.load(ids, (id(lvr), tag))
            if self.inject_squash_probability and (
                    self.sim.rng.random() < self.inject_squash_probability):
                self.squash_refill(tag)
                # re-executed micro-op redraws from the checkpoint
                assert reg.redrawable
                lvr.fill(reg.ids)
                reg.redrawable = False
                self.sim.stats.bump("squash_redraws")
        return AmiResult(0, hop2 + extra, serialize=serialize, fetched=True)

    def alloc_id(self, tag=None) -> AmiResult:
        """First micro-op of aload/astore: pop a free ID, batching refills."""
        self._require_ready()
        cycles = 1
        serialize = self.params.dma_mode
        fetched = False
        if not len(self.free_lvr):
            res = self._refill(self.free_lvr, self._fetch_free, tag)
            cycles = max(cycles, res.cycles)
            serialize = serialize or res.serialize
            fetched = res.fetched
            if not len(self.free_lvr):
                self.sim.stats.bump("alloc_failures")
                self._audit()
                return AmiResult(ID_FAIL, cycles, serialize, fetched)
        rid = self.free_lvr.pop()
        self.tracker.move(rid, LOC_ALSU_FREE, LOC_SOFTWARE)
        self.software_held += 1
        self.sim.stats.bump("ids_allocated")
        self._audit()
        return AmiResult(rid, cycles, serialize, fetched)

    def getfin(self, tag=None) -> AmiResult:
        """Poll one completed request ID; 0 when none has finished."""
        self._require_ready()
        cycles = 1
        serialize = self.params.dma_mode
        fetched = False
        if not len(self.fin_lvr):
            res = self._refill(self.fin_lvr, self._fetch_finished, tag)
            cycles = max(cycles, res.cycles)
            serialize = serialize or res.serialize
            fetched = res.fetched
            if not len(self.fin_lvr):
                self.sim.stats.bump("getfin_misses")
                self._audit()
                return AmiResult(ID_FAIL, cycles, serialize, fetched)
        rid = self.fin_lvr.pop()
        self.tracker.move(rid, LOC_ALSU_FIN, LOC_SOFTWARE)
        self.software_held += 1
        self.sim.stats.bump("getfin_hits")
        self._audit()
        return AmiResult(rid, cycles, serialize, fetched)

    def release_id(self, rid: int) -> AmiResult:
        """Software hands a consumed ID back to the free side."""
        self._require_ready()
        self.tracker.move(rid, LOC_SOFTWARE, LOC_ALSU_FREE)
        self.software_held -= 1
        entry = self._amart[rid]
        if entry[3] == ST_DONE:
            entry[3] = ST_IDLE
            self._amart_store(rid)
        if self.free_lvr.is_full():
            ids = self.free_lvr.drain()
            extra = 0
            for old in ids:
                self.tracker.move(old, LOC_ALSU_FREE, LOC_ASMC_FREE)
                extra += self.free_ring.push(old)
            self.sim.stats.bump("asmc_messages")
            self.sim.stats.bump("writebacks")
        self.free_lvr.push(rid)
        self._audit()
        return AmiResult(rid, 1)

    def issue(self, kind: str, rid: int, spm_addr: int, mem_addr: int, tag) -> AmiResult:
        """Second micro-op: validate and buffer the request until commit."""
        self._require_ready()
        if rid == ID_FAIL:
            raise AmuFault("issue with the failure sentinel id 0")
        if self.tracker.loc[rid] != LOC_SOFTWARE:
            raise AmuFault(f"issue of id {rid} not held by software")
        if kind not in ("aload", "astore"):
            raise AmuFault(f"unknown request kind {kind}")
        g = self.granularity
        data_lo, data_hi = self.data_area
        if not (0 <= spm_addr and spm_addr + g <= self.hier.cfg.spm_bytes):
            raise AmuFault(f"spm address [{spm_addr},+{g}) outside SPM")
        if spm_addr < self.metadata_end and spm_addr + g > self.queue_base:
            raise AmuFault(f"spm address [{spm_addr},+{g}) overlaps metadata area")
        if self.hier.image.check_range(mem_addr, g) != REGION_FAR:
            raise AmuFault(f"request target {mem_addr:#x} not in far region")
        if tag in self._pending_issues:
            raise AmuFault("issue tag reused before commit")
        self._pending_issues[tag] = (kind, rid, spm_addr, mem_addr)
        return AmiResult(rid, 1, serialize=self.params.dma_mode)

    def commit(self, tag) -> None:
        """Instruction retirement: clear checkpoints, deliver buffered issues."""
        for reg in self.uncommitted:
            if reg.occupied and not reg.redrawable and reg.tag[1] == tag:
                reg.clear()
        pending = self._pending_issues.pop(tag, None)
        if pending is not None:
            self.sim.stats.bump("asmc_messages")
            self.sim.schedule(self.params.hop_cycles,
                              lambda: self._asmc_accept(*pending), "issue-deliver")

    def squash_refill(self, tag) -> bool:
        """Cancel a not-yet-committed micro-op that performed a batch fetch.

        The checkpoint keeps the fetched IDs; the live register contents are
        discarded (rename rollback) and the next refill redraws from the
        checkpoint instead of going back to the ASMC. Unknown tags are a
        no-op, matching a squash with no pending fetch.
        """
        self.sim.stats.bump("squashes")
        hit = False
        for reg in self.uncommitted:
            if reg.occupied and not reg.redrawable and reg.tag[1] == tag:
                lvr = self.free_lvr if reg.tag[0] == id(self.free_lvr) else self.fin_lvr
                if lvr.contents() != reg.ids:
                    raise AmuFault("squash after the fetched batch was partially consumed")
                lvr.fill([])
                reg.redrawable = True
                hit = True
        self._audit()
        return hit

    # -- ASMC ----------------------------------------------------------------------

    def _fetch_free(self, maxn: int) -> tuple[list[int], int]:
        ids, extra = self.free_ring.pop_batch(maxn)
        for rid in ids:
            self.tracker.move(rid, LOC_ASMC_FREE, LOC_ALSU_FREE)
        return ids, extra

    def _fetch_finished(self, maxn: int) -> tuple[list[int], int]:
        ids, extra = self.fin_ring.pop_batch(maxn)
        for rid in ids:
            self.tracker.move(rid, LOC_ASMC_FIN, LOC_ALSU_FIN)
        return ids, extra

    def _asmc_accept(self, kind: str, rid: int, spm_addr: int, mem_addr: int) -> None:
        self.tracker.move(rid, LOC_SOFTWARE, LOC_AMART)
        self.software_held -= 1
        self.outstanding += 1
        if self.outstanding > self.queue_length:
            raise AmuFault("outstanding requests exceed queue_length")
        g = self.granularity
        nsub = (g + LINE_BYTES - 1) // LINE_BYTES
        kind_code = 1 if kind == "aload" else 2
        self._amart[rid] = [spm_addr, mem_addr, kind_code, ST_INFLIGHT, nsub, 0]
        self._amart_store(rid)
        self.sim.stats.bump("subrequests_issued", nsub)
        for i in range(nsub):
            off = i * LINE_BYTES
            chunk = min(LINE_BYTES, g - off)
            if kind == "astore":
                # snapshot SPM bytes at service time; far image updated on landing
                payload = self.hier.spm_read(spm_addr + off, chunk)
                self.hier.far_request(
                    mem_addr + off, chunk,
                    lambda a=mem_addr + off, p=payload, r=rid: self._sub_done_store(r, a, p))
            else:
                self.hier.far_request(
                    mem_addr + off, chunk,
                    lambda a=mem_addr + off, s=spm_addr + off, c=chunk, r=rid:
                        self._sub_done_load(r, a, s, c))
        self._audit()

    def _sub_done_store(self, rid: int, addr: int, payload: bytes) -> None:
        self.hier.image.write(addr, payload)
        self._sub_done(rid)

    def _sub_done_load(self, rid: int, addr: int, spm_addr: int, chunk: int) -> None:
        self.hier.spm_write(spm_addr, self.hier.image.read(addr, chunk))
        self._sub_done(rid)

    def _sub_done(self, rid: int) -> None:
        entry = self._amart[rid]
        if entry[3] != ST_INFLIGHT:
            raise AmuFault(f"sub-response for id {rid} in status {entry[3]}")
        entry[5] += 1
        if entry[5] < entry[4]:
            self._amart_store(rid)
            return
        entry[3] = ST_DONE
        self._amart_store(rid)
        self.tracker.move(rid, LOC_AMART, LOC_ASMC_FIN)
        self.outstanding -= 1
        extra = self.fin_ring.push(rid)
        if extra:
            self.sim.stats.bump("fin_ring_spm_ops")
        for listener in self.finished_listeners:
            listener(rid)
        self._audit()

    # -- audits -----------------------------------------------------------------

    def enable_full_audit(self) -> None:
        self._audit_hook = self.full_audit

    def _audit(self) -> None:
        if self._audit_hook is not None:
            self._audit_hook()

    def full_audit(self) -> None:
        """Exhaustive partition check against the real structures; fuzz tests
        run this after every step. Software-held IDs are the residual set."""
        alsu_free = self.free_lvr.contents()
        alsu_fin = self.fin_lvr.contents()
        for reg in self.uncommitted:
            if reg.occupied and reg.redrawable:
                # squashed fetch: the checkpoint is the only live copy
                if reg.tag[0] == id(self.free_lvr):
                    alsu_free = alsu_free + reg.ids
                else:
                    alsu_fin = alsu_fin + reg.ids
        sets = {
            LOC_ASMC_FREE: self.free_ring.contents(),
            LOC_ASMC_FIN: self.fin_ring.contents(),
            LOC_AMART: [rid for rid in range(1, self.queue_length + 1)
                        if self._amart[rid][3] in (ST_ISSUED, ST_INFLIGHT)],
            LOC_ALSU_FREE: alsu_free,
            LOC_ALSU_FIN: alsu_fin,
        }
        seen: dict[int, int] = {}
        for loc, ids in sets.items():
            for rid in ids:
                if rid in seen:
                    raise AmuFault(
                        f"id {rid} duplicated: {LOC_NAMES[seen[rid]]} and {LOC_NAMES[loc]}")
                seen[rid] = loc
                if self.tracker.loc[rid] != loc:
                    raise AmuFault(
                        f"id {rid} tracked in {LOC_NAMES[self.tracker.loc[rid]]}"
                        f" but found in {LOC_NAMES[loc]}")
        residual = self.queue_length - len(seen)
        if residual != self.software_held:
            raise AmuFault(
                f"{residual} ids unaccounted for but {self.software_held} held by software")
        for rid in range(1, self.queue_length + 1):
            if rid not in seen and self.tracker.loc[rid] != LOC_SOFTWARE:
                raise AmuFault(
                    f"id {rid} missing from hardware but tracked in "
                    f"{LOC_NAMES[self.tracker.loc[rid]]}")
