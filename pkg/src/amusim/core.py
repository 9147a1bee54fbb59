"""Window-limited timing model of the out-of-order core.

This is a limit-study model: in-order dispatch bounded by issue width and
ROB/LSQ occupancy, dataflow execution (an instruction starts when its
operands are ready), and in-order retirement bounded by commit width. A
synchronous memory access holds its reorder-buffer slot until data
returns, so a far-memory load parks the window for thousands of cycles;
the asynchronous micro-ops complete in a handful of cycles and retire
without waiting for memory, which is the entire effect under study.

Instruction streams are pulled lazily from a feed. The feed resolves
functional behaviour (what a load returns, which branch the runtime takes)
at the moment it emits a record, i.e. at dispatch; the timing model then
decides when that record completes and retires.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import SimulationError, Simulator
from .memory import MemoryHierarchy

WAIT = "wait"
DONE = "done"

KIND_COMPUTE = 0
KIND_MEM = 1
KIND_SPM = 2
KIND_AMI = 3


@dataclass
class CoreParams:
    rob_entries: int = 512
    lsq_entries: int = 192
    issue_width: int = 6
    commit_width: int = 6
    coroutine_switch_cycles: int = 40


class InstRecord:
    """One dispatched unit: a single instruction or a homogeneous block
    (a block occupies `slots` window entries and commit bandwidth)."""

    __slots__ = (
        "kind", "slots", "n_ops", "serial", "latency", "addr", "size",
        "deps", "lsq_weight", "fence", "guard", "on_retire", "tag",
        "dispatch_done", "exec_start", "completed_at", "pending_deps",
        "subscribers",
    )

    def __init__(self, kind, slots=1, n_ops=1, serial=False, latency=0,
                 addr=0, size=0, deps=(), lsq_weight=0, fence=False,
                 guard=False, on_retire=None):
        self.kind = kind
        self.slots = slots
        self.n_ops = n_ops
        self.serial = serial
        self.latency = latency
        self.addr = addr
        self.size = size
        self.deps = deps
        self.lsq_weight = lsq_weight
        self.fence = fence
        self.guard = guard
        self.on_retire = on_retire
        self.tag = None
        self.dispatch_done = 0
        self.exec_start = 0
        self.completed_at = None
        self.pending_deps = 0
        self.subscribers = None


def compute(n_ops=1, deps=(), serial=False, guard=False):
    return InstRecord(KIND_COMPUTE, slots=n_ops, n_ops=n_ops, serial=serial,
                      deps=deps, guard=guard)


def mem_access(addr, size, deps=(), guard=False):
    """A load or store on the normal cache path (timing is symmetric)."""
    return InstRecord(KIND_MEM, slots=1, addr=addr, size=size, deps=deps,
                      lsq_weight=1, guard=guard)


def spm_block(n_accesses, deps=()):
    """A run of scratchpad loads/stores; fixed delay, no MSHR use."""
    return InstRecord(KIND_SPM, slots=n_accesses, n_ops=n_accesses,
                      deps=deps, lsq_weight=n_accesses)


def ami_op(latency, slots=1, deps=(), fence=False, on_retire=None):
    return InstRecord(KIND_AMI, slots=slots, latency=latency, deps=deps,
                      fence=fence, on_retire=on_retire)


class OooCore:
    """Drives a feed of InstRecords through the dispatch/execute/retire
    pipeline on one simulator instance."""

    def __init__(self, sim: Simulator, params: CoreParams, hier: MemoryHierarchy, feed):
        self.sim = sim
        self.params = params
        self.hier = hier
        self.feed = feed
        self.window: deque[InstRecord] = deque()
        self.rob_used = 0
        self.lsq_used = 0
        self.incomplete = 0
        self.rob_peak = 0
        self.lsq_peak = 0
        self.guard_cycles = 0
        self.retired_slots = 0
        self._seq = 0
        self._disp_cycle = -1
        self._disp_budget = 0
        self._ret_cycle = -1
        self._ret_budget = 0
        self._peeked: InstRecord | None = None
        self._pending_fence: InstRecord | None = None
        self._dispatch_blocked = False
        self._retire_queue: deque[tuple[int, InstRecord]] = deque()
        self._retire_scheduled = False
        self._kick_scheduled = False
        self._in_dispatch = False
        self._done = False

    # -- public ----------------------------------------------------------------

    def start(self) -> None:
        self.sim.schedule(0, self._dispatch_loop, "core-start")

    def kick(self) -> None:
        """Wake the dispatcher (used by feeds after a WAIT)."""
        if not self._kick_scheduled:
            self._kick_scheduled = True
            self.sim.schedule(0, self._kicked, "core-kick")

    def _kicked(self) -> None:
        self._kick_scheduled = False
        self._dispatch_loop()

    # -- dispatch ----------------------------------------------------------------

    def _consume_dispatch(self, slots: int) -> int:
        now = self.sim.clock.now
        width = self.params.issue_width
        if self._disp_cycle < now:
            self._disp_cycle = now
            self._disp_budget = width
        if slots <= self._disp_budget:
            self._disp_budget -= slots
        else:
            extra = slots - self._disp_budget
            adv = -(-extra // width)
            self._disp_cycle += adv
            self._disp_budget = adv * width - extra
        return self._disp_cycle

    def _dispatch_loop(self) -> None:
        if self._in_dispatch or self._done:
            return
        self._in_dispatch = True
        try:
            while True:
                if self._dispatch_blocked:
                    return
                rec = self._peeked
                if rec is None:
                    item = self.feed.next(self)
                    if item is WAIT:
                        return
                    if item is DONE:
                        self._done = True
                        return
                    rec = item
                if self.rob_used + rec.slots > self.params.rob_entries:
                    self._peeked = rec
                    return
                if rec.lsq_weight and self.lsq_used + rec.lsq_weight > self.params.lsq_entries:
                    self._peeked = rec
                    return
                self._peeked = None
                self._dispatch(rec)
        finally:
            self._in_dispatch = False

    def _dispatch(self, rec: InstRecord) -> None:
        self._seq += 1
        rec.tag = self._seq
        rec.dispatch_done = self._consume_dispatch(rec.slots)
        self.rob_used += rec.slots
        self.rob_peak = max(self.rob_peak, self.rob_used)
        if rec.lsq_weight:
            self.lsq_used += rec.lsq_weight
            self.lsq_peak = max(self.lsq_peak, self.lsq_used)
        self.window.append(rec)
        self.incomplete += 1
        ready = rec.dispatch_done
        pending = 0
        for dep in rec.deps:
            if dep.completed_at is None:
                if dep.subscribers is None:
                    dep.subscribers = []
                dep.subscribers.append(rec)
                pending += 1
            elif dep.completed_at > ready:
                ready = dep.completed_at
        rec.deps = ()
        rec.pending_deps = pending
        rec.exec_start = ready
        if rec.fence:
            self._dispatch_blocked = True
            if pending == 0 and self.incomplete == 1:
                self._begin_exec(rec)
            else:
                self._pending_fence = rec
        elif pending == 0:
            self._begin_exec(rec)

    # -- execute ---------------------------------------------------------------

    def _begin_exec(self, rec: InstRecord) -> None:
        start = max(rec.exec_start, self.sim.clock.now)
        rec.exec_start = start
        delay = start - self.sim.clock.now
        if rec.kind == KIND_MEM:
            self.sim.schedule(delay, lambda: self.hier.sync_access(
                rec.addr, rec.size, "rw", lambda: self._complete(rec)), "mem-issue")
        elif rec.kind == KIND_SPM:
            pipelined = -(-(rec.n_ops - 1) // self.params.issue_width)
            total = delay + self.hier.cfg.spm_delay_cycles + pipelined
            self.hier.check_spm_range(0, 0)
            self.sim.schedule(total, lambda: self._complete(rec), "spm-block")
        elif rec.kind == KIND_AMI:
            self.sim.schedule(delay + rec.latency, lambda: self._complete(rec), "ami")
        else:
            lat = rec.n_ops if rec.serial else -(-rec.n_ops // self.params.issue_width)
            self.sim.schedule(delay + lat, lambda: self._complete(rec), "compute")

    def _complete(self, rec: InstRecord) -> None:
        now = self.sim.clock.now
        rec.completed_at = now
        self.incomplete -= 1
        if rec.guard:
            self.guard_cycles += now - rec.exec_start + rec.slots
        if rec.lsq_weight:
            self.lsq_used -= rec.lsq_weight
        if rec.subscribers:
            for sub in rec.subscribers:
                sub.pending_deps -= 1
                if sub.exec_start < now:
                    sub.exec_start = now
                if sub.pending_deps == 0 and not sub.fence:
                    self._begin_exec(sub)
            rec.subscribers = None
        fence = self._pending_fence
        if fence is not None and fence.pending_deps == 0 and self.incomplete == 1:
            self._pending_fence = None
            self._begin_exec(fence)
        self._drain_retirement()
        if rec.lsq_weight or rec.fence:
            self._dispatch_loop()

    # -- retire ------------------------------------------------------------------

    def _consume_retire(self, completed_at: int, slots: int) -> int:
        width = self.params.commit_width
        if self._ret_cycle < completed_at:
            self._ret_cycle = completed_at
            self._ret_budget = width
        if slots <= self._ret_budget:
            self._ret_budget -= slots
        else:
            extra = slots - self._ret_budget
            adv = -(-extra // width)
            self._ret_cycle += adv
            self._ret_budget = adv * width - extra
        return self._ret_cycle

    def _drain_retirement(self) -> None:
        window = self.window
        queue = self._retire_queue
        while window and window[0].completed_at is not None:
            rec = window.popleft()
            queue.append((self._consume_retire(rec.completed_at, rec.slots), rec))
        if queue and not self._retire_scheduled:
            self._retire_scheduled = True
            self.sim.schedule(queue[0][0] - self.sim.clock.now, self._retire_event, "retire")

    def _retire_event(self) -> None:
        self._retire_scheduled = False
        now = self.sim.clock.now
        queue = self._retire_queue
        freed = False
        while queue and queue[0][0] <= now:
            _, rec = queue.popleft()
            self.rob_used -= rec.slots
            self.retired_slots += rec.slots
            self.sim.stats.committed_instructions += rec.slots
            if rec.fence:
                self._dispatch_blocked = False
            if rec.on_retire is not None:
                rec.on_retire()
            freed = True
        if queue and not self._retire_scheduled:
            self._retire_scheduled = True
            self.sim.schedule(queue[0][0] - now, self._retire_event, "retire")
        if freed:
            self._dispatch_loop()


class BaselineFeed:
    """Adapts a generator of InstRecords to the core feed protocol."""

    def __init__(self, gen):
        self._gen = gen
        self._exhausted = False

    def next(self, core):
        if self._exhausted:
            return DONE
        try:
            return next(self._gen)
        except StopIteration:
            self._exhausted = True
            return DONE


class SimulationFault(SimulationError):
    """Raised for malformed instruction streams."""
