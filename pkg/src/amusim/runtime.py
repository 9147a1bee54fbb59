"""Cooperative coroutine runtime over the asynchronous-access ISA.

Tasks are Python generators that yield operation descriptors; the runtime
is the core's instruction feed, translating each descriptor into timed
instruction records while performing its functional effect immediately.
Scheduling follows the event-loop shape of the programming framework:
run every runnable task until all are blocked, poll one completed request
ID, wake its waiter, and only when nothing is deliverable let simulated
time advance to the next completion.

The address guard table provides software memory disambiguation: k hash
functions map an address into k separate tables; insertion falls through
to the next table on collision, waiters queue FIFO per address, and a
collision in every table is a fault (no displacement/eviction loop).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .amu import ID_FAIL, AmuSystem
from .core import (DONE, KIND_SPM, WAIT, InstRecord, OooCore, ami_op, compute,
                   mem_access, spm_block)
from .engine import SimulationError, Simulator

T_RUNNABLE = "runnable"
T_RUNNING = "running"
T_WAIT_IDS = "suspended-on-id"
T_WAIT_GUARD = "suspended-on-address"
T_WAIT_RETRY = "retry-after-loop-turn"
T_DONE = "done"

GUARD_HASH_CONSTANTS = (
    0x9E3779B97F4A7C15,
    0xC2B2AE3D27D4EB4F,
    0x165667B19E3779F9,
    0x27D4EB2F165667C5,
    0x85EBCA77C2B2AE63,
    0xFF51AFD7ED558CCD,
)
MASK64 = 2**64 - 1


class RuntimeFault(SimulationError):
    """Deadlock, guard misuse, or scratchpad allocation failure."""


# --------------------------------------------------------------------------
# Operation descriptors tasks may yield


@dataclass
class Compute:
    n_ops: int = 1
    serial: bool = False


@dataclass
class SpmReadU64:
    offset: int


@dataclass
class SpmWriteU64:
    offset: int
    value: int


@dataclass
class SpmBlockAccess:
    n_accesses: int


@dataclass
class MemReadU64:
    addr: int


@dataclass
class MemWriteU64:
    addr: int
    value: int


@dataclass
class IssueAload:
    spm_addr: int
    mem_addr: int


@dataclass
class IssueAstore:
    spm_addr: int
    mem_addr: int


@dataclass
class WaitIds:
    ids: tuple


@dataclass
class AwaitAload:
    spm_addr: int
    mem_addr: int


@dataclass
class AwaitAstore:
    spm_addr: int
    mem_addr: int


@dataclass
class GuardStart:
    addr: int


@dataclass
class GuardEnd:
    addr: int


@dataclass
class YieldNow:
    pass


@dataclass
class ParkUntilLoopTurn:
    """Yield until the event loop next makes progress (ID-exhaustion retry)."""



class Task:
    """One spawned coroutine and its scheduling state."""

    __slots__ = ("tid", "gen", "state", "last_rec", "entry_dep", "resume_dep",
                 "send_value", "replay_op", "waiting", "acquired_ids",
                 "guards_held", "saw_alloc_failure")

    def __init__(self, tid: int, gen):
        self.tid = tid
        self.gen = gen
        self.state = T_RUNNABLE
        self.last_rec: InstRecord | None = None
        self.entry_dep: InstRecord | None = None
        self.resume_dep: InstRecord | None = None
        self.send_value = None
        self.replay_op = None
        self.waiting: set[int] | None = None
        self.acquired_ids: list[int] = []
        self.guards_held: set[int] = set()
        self.saw_alloc_failure = False


class SpmAllocator:
    """Fixed-size slot allocator over the scratchpad data area."""

    def __init__(self, lo: int, hi: int, slot_bytes: int):
        self.slot_bytes = slot_bytes
        self.lo = lo
        self.hi = hi
        self._free = deque(range(lo, hi - slot_bytes + 1, slot_bytes))

    def alloc(self) -> int:
        if not self._free:
            raise RuntimeFault("scratchpad data area exhausted")
        return self._free.popleft()

    def free(self, offset: int) -> None:
        self._free.append(offset)


class AddressGuardTable:
    """Multi-table cuckoo-style guard set with FIFO waiters per address."""

    def __init__(self, tables: int, buckets: int, base_addr: int):
        if tables > len(GUARD_HASH_CONSTANTS):
            raise RuntimeFault(f"at most {len(GUARD_HASH_CONSTANTS)} guard tables supported")
        self.tables = tables
        self.buckets = buckets
        self.base_addr = base_addr
        self.slots: list[list] = [[None] * buckets for _ in range(tables)]
        self.live = 0
        self.overflows = 0

    def _bucket(self, table: int, addr: int) -> int:
        return (((addr * GUARD_HASH_CONSTANTS[table]) & MASK64) >> 17) % self.buckets

    def bucket_addr(self, table: int, bucket: int) -> int:
        return self.base_addr + (table * self.buckets + bucket) * 16

    def probe(self, addr: int):
        """Returns (table, bucket, entry|None, probes) for addr's home slot."""
        probes = []
        for t in range(self.tables):
            b = self._bucket(t, addr)
            probes.append((t, b))
            entry = self.slots[t][b]
            if entry is not None and entry[0] == addr:
                return t, b, entry, probes
        return None, None, None, probes

    def insert_slot(self, addr: int):
        """First empty slot in table order, or None when every table collides."""
        for t in range(self.tables):
            b = self._bucket(t, addr)
            if self.slots[t][b] is None:
                return t, b
        return None


@dataclass
class RuntimeParams:
    coroutine_switch_cycles: int = 40
    guard_tables: int = 3
    guard_buckets: int = 1024
    guard_base_addr: int = 0


class Runtime:
    """Scheduler, awaitables and disambiguation guards; acts as the core's
    instruction feed (see OooCore). Single simulation instance only."""

    def __init__(self, sim: Simulator, amu: AmuSystem, params: RuntimeParams):
        self.sim = sim
        self.amu = amu
        self.params = params
        self.core: OooCore | None = None
        self.guard = AddressGuardTable(params.guard_tables, params.guard_buckets,
                                       params.guard_base_addr)
        self.spm_alloc: SpmAllocator | None = None
        self._tasks: list[Task] = []
        self._runnable: deque[Task] = deque()
        self._retry_parked: deque[Task] = deque()
        self._spawn_queue: deque = deque()
        self._current: Task | None = None
        self._queue: deque[InstRecord] = deque()
        self._undelivered: set[int] = set()
        self._id_waiters: dict[int, Task] = {}
        self._sched_last: InstRecord | None = None
        self._done_tasks = 0
        self._idle = False
        self._tag = 0
        self.switches = 0
        self.suspensions = 0
        self.loop_turns = 0
        self.alloc_retries = 0
        self.guard_hits = 0
        self.guard_misses = 0
        amu.finished_listeners.append(self._on_delivery)
        sim.idle_hooks.append(self._deadlock_check)

    # -- setup -------------------------------------------------------------------

    def attach_core(self, core: OooCore) -> None:
        self.core = core

    def configure_spm_data_area(self, slot_bytes: int) -> None:
        lo, hi = self.amu.data_area
        self.spm_alloc = SpmAllocator(lo, hi, slot_bytes)

    def spawn(self, gen) -> Task:
        task = Task(len(self._tasks) + 1, gen)
        self._tasks.append(task)
        self._runnable.append(task)
        return task

    def spawn_on_demand(self, factory) -> None:
        """Queue a task factory; the event loop spawns it when a poll comes
        back empty (the try-to-spawn-new-work path)."""
        self._spawn_queue.append(factory)

    # -- feed protocol -------------------------------------------------------------

    def next(self, core: OooCore):
        while True:
            if self._queue:
                return self._queue.popleft()
            if self._current is not None:
                self._step_current()
                continue
            if self._runnable:
                self._enter(self._runnable.popleft())
                continue
            if self._all_done():
                return DONE
            if not self._loop_turn():
                self._idle = True
                return WAIT

    def _all_done(self) -> bool:
        return (self._done_tasks == len(self._tasks) and not self._spawn_queue
                and not self._retry_parked)

    def _on_delivery(self, rid: int) -> None:
        if self._idle:
            self._idle = False
            self.core.kick()

    def _deadlock_check(self) -> bool:
        if self._all_done() or self.amu.outstanding:
            return False
        dump = [f"task {t.tid}: {t.state}" for t in self._tasks if t.state != T_DONE]
        if not dump:
            return False
        raise RuntimeFault(
            "runtime deadlock: all tasks suspended with no outstanding requests\n  "
            + "\n  ".join(dump))

    # -- record emission helpers -----------------------------------------------------

    def _emit(self, task: Task, rec: InstRecord) -> InstRecord:
        deps = []
        if task.last_rec is not None:
            deps.append(task.last_rec)
        if task.entry_dep is not None:
            deps.append(task.entry_dep)
            task.entry_dep = None
        rec.deps = (*rec.deps, *deps)
        task.last_rec = rec
        self._queue.append(rec)
        return rec

    def _emit_sched(self, rec: InstRecord) -> InstRecord:
        if self._sched_last is not None:
            rec.deps = (*rec.deps, self._sched_last)
        self._sched_last = rec
        self._queue.append(rec)
        return rec

    def _next_tag(self) -> int:
        self._tag += 1
        return self._tag

    # -- scheduling --------------------------------------------------------------------

    def _enter(self, task: Task) -> None:
        rec = compute(self.params.coroutine_switch_cycles, serial=True)
        if task.resume_dep is not None:
            rec.deps = (task.resume_dep,)
            task.resume_dep = None
        self._emit_sched(rec)
        self.switches += 1
        task.entry_dep = rec
        task.state = T_RUNNING
        self._current = task
        for rid in task.acquired_ids:
            self.amu.release_id(rid)
        task.acquired_ids = []

    def _finish_task(self, task: Task) -> None:
        if task.guards_held:
            raise RuntimeFault(f"task {task.tid} finished holding guards {task.guards_held}")
        task.state = T_DONE
        self._done_tasks += 1
        self._current = None

    def _loop_turn(self) -> bool:
        """One event-loop iteration; False means nothing to do but wait."""
        self.loop_turns += 1
        tag = self._next_tag()
        res = self.amu.getfin(tag)
        rec = ami_op(res.cycles, fence=res.serialize)
        rec.on_retire = lambda t=tag: self.amu.commit(t)
        self._emit_sched(rec)
        if res.value != ID_FAIL:
            self._deliver(res.value, rec)
            self._requeue_retries()
            return True
        if self._spawn_queue:
            factory = self._spawn_queue.popleft()
            self.spawn(factory())
            self._emit_sched(compute(4))
            self._requeue_retries()
            return True
        return False

    def _requeue_retries(self) -> None:
        while self._retry_parked:
            task = self._retry_parked.popleft()
            task.state = T_RUNNABLE
            self._runnable.append(task)

    def _deliver(self, rid: int, rec: InstRecord) -> None:
        task = self._id_waiters.pop(rid, None)
        if task is None:
            self._undelivered.add(rid)
            return
        task.acquired_ids.append(rid)
        task.waiting.discard(rid)
        if not task.waiting:
            task.waiting = None
            task.state = T_RUNNABLE
            task.resume_dep = rec
            self._runnable.append(task)

    # -- task stepping -------------------------------------------------------------------

    def _step_current(self) -> None:
        task = self._current
        op = task.replay_op
        if op is not None:
            task.replay_op = None
        else:
            try:
                op = task.gen.send(task.send_value)
            except StopIteration:
                self._finish_task(task)
                return
            task.send_value = None
        handler = self._HANDLERS.get(type(op))
        if handler is None:
            raise RuntimeFault(f"task yielded unknown operation {op!r}")
        handler(self, task, op)

    def _op_compute(self, task: Task, op: Compute) -> None:
        self._emit(task, compute(op.n_ops, serial=op.serial))

    def _op_spm_read(self, task: Task, op: SpmReadU64) -> None:
        task.send_value = self.amu.hier.spm_read_u64(op.offset)
        self._emit(task, InstRecord(KIND_SPM, slots=1, n_ops=1, lsq_weight=1))

    def _op_spm_write(self, task: Task, op: SpmWriteU64) -> None:
        self.amu.hier.spm_write_u64(op.offset, op.value)
        self._emit(task, InstRecord(KIND_SPM, slots=1, n_ops=1, lsq_weight=1))

    def _op_spm_block(self, task: Task, op: SpmBlockAccess) -> None:
        self._emit(task, spm_block(op.n_accesses))

    def _op_mem_read(self, task: Task, op: MemReadU64) -> None:
        task.send_value = self.amu.hier.image.read_u64(op.addr)
        self._emit(task, mem_access(op.addr, 8))

    def _op_mem_write(self, task: Task, op: MemWriteU64) -> None:
        self.amu.hier.image.write_u64(op.addr, op.value)
        self._emit(task, mem_access(op.addr, 8))

    def _issue(self, task: Task, kind: str, spm_addr: int, mem_addr: int):
        """Allocate an ID and issue the request; returns the ID (0 on
        exhaustion, with no issue performed)."""
        tag = self._next_tag()
        res = self.amu.alloc_id(tag)
        alloc = ami_op(res.cycles, fence=res.serialize)
        alloc.on_retire = lambda t=tag: self.amu.commit(t)
        self._emit(task, alloc)
        if res.value == ID_FAIL:
            return 0
        itag = self._next_tag()
        ires = self.amu.issue(kind, res.value, spm_addr, mem_addr, itag)
        issue = ami_op(ires.cycles, fence=ires.serialize)
        issue.on_retire = lambda t=itag: self.amu.commit(t)
        self._emit(task, issue)
        return res.value

    def _op_issue_aload(self, task: Task, op: IssueAload) -> None:
        task.send_value = self._issue(task, "aload", op.spm_addr, op.mem_addr)
        if task.send_value == 0:
            task.saw_alloc_failure = True

    def _op_issue_astore(self, task: Task, op: IssueAstore) -> None:
        task.send_value = self._issue(task, "astore", op.spm_addr, op.mem_addr)
        if task.send_value == 0:
            task.saw_alloc_failure = True

    def _op_wait_ids(self, task: Task, op: WaitIds) -> None:
        want = set(op.ids)
        if ID_FAIL in want:
            raise RuntimeFault("cannot wait on the failure sentinel id 0")
        for rid in list(want):
            if rid in self._undelivered:
                # already delivered while the task was running: consume now
                self._undelivered.discard(rid)
                self.amu.release_id(rid)
                want.discard(rid)
            else:
                self._id_waiters[rid] = task
        if not want:
            return
        task.waiting = want
        task.state = T_WAIT_IDS
        self.suspensions += 1
        self._current = None

    def _await(self, task: Task, kind: str, op) -> None:
        rid = self._issue(task, kind, op.spm_addr, op.mem_addr)
        if rid == 0:
            task.saw_alloc_failure = True
            task.replay_op = op
            task.state = T_WAIT_RETRY
            self.alloc_retries += 1
            self._retry_parked.append(task)
            self._current = None
            return
        self._op_wait_ids(task, WaitIds((rid,)))

    def _op_await_aload(self, task: Task, op: AwaitAload) -> None:
        self._await(task, "aload", op)

    def _op_await_astore(self, task: Task, op: AwaitAstore) -> None:
        self._await(task, "astore", op)

    def _op_yield(self, task: Task, op: YieldNow) -> None:
        task.state = T_RUNNABLE
        self._runnable.append(task)
        self._current = None

    def _op_park(self, task: Task, op: ParkUntilLoopTurn) -> None:
        task.state = T_WAIT_RETRY
        self.alloc_retries += 1
        self._retry_parked.append(task)
        self._current = None

    # -- disambiguation guards ----------------------------------------------------------

    def _op_guard_start(self, task: Task, op: GuardStart) -> None:
        addr = op.addr
        if addr in task.guards_held:
            raise RuntimeFault(f"task {task.tid} re-entered guard {addr:#x}")
        self._emit(task, compute(2, guard=True))
        t, b, entry, probes = self.guard.probe(addr)
        for pt, pb in probes:
            self._emit(task, mem_access(self.guard.bucket_addr(pt, pb), 8, guard=True))
        if entry is not None:
            # occupied by an earlier access to the same address: queue FIFO
            entry[1].append(task)
            self._emit(task, mem_access(self.guard.bucket_addr(t, b) + 8, 8, guard=True))
            task.state = T_WAIT_GUARD
            self.guard_hits += 1
            self.suspensions += 1
            self._current = None
            return
        slot = self.guard.insert_slot(addr)
        if slot is None:
            self.guard.overflows += 1
            raise RuntimeFault(
                f"guard table overflow: address {addr:#x} collides in all "
                f"{self.guard.tables} tables")
        st, sb = slot
        self.guard.slots[st][sb] = (addr, deque())
        self.guard.live += 1
        self._emit(task, mem_access(self.guard.bucket_addr(st, sb), 8, guard=True))
        self.guard_misses += 1
        task.guards_held.add(addr)

    def _op_guard_end(self, task: Task, op: GuardEnd) -> None:
        addr = op.addr
        if addr not in task.guards_held:
            raise RuntimeFault(f"task {task.tid} ended guard {addr:#x} it does not hold")
        task.guards_held.discard(addr)
        self._emit(task, compute(2, guard=True))
        t, b, entry, probes = self.guard.probe(addr)
        if entry is None:
            raise RuntimeFault(f"guard entry for {addr:#x} vanished")
        self._emit(task, mem_access(self.guard.bucket_addr(t, b), 8, guard=True))
        rec = self._emit(task, mem_access(self.guard.bucket_addr(t, b) + 8, 8, guard=True))
        waiters = entry[1]
        if waiters:
            nxt = waiters.popleft()
            nxt.guards_held.add(addr)
            nxt.state = T_RUNNABLE
            nxt.resume_dep = rec
            self._runnable.append(nxt)
        else:
            self.guard.slots[t][b] = None
            self.guard.live -= 1

    _HANDLERS = {
        Compute: _op_compute,
        SpmReadU64: _op_spm_read,
        SpmWriteU64: _op_spm_write,
        SpmBlockAccess: _op_spm_block,
        MemReadU64: _op_mem_read,
        MemWriteU64: _op_mem_write,
        IssueAload: _op_issue_aload,
        IssueAstore: _op_issue_astore,
        WaitIds: _op_wait_ids,
        AwaitAload: _op_await_aload,
        AwaitAstore: _op_await_astore,
        GuardStart: _op_guard_start,
        GuardEnd: _op_guard_end,
        YieldNow: _op_yield,
        ParkUntilLoopTurn: _op_park,
    }

