"""Benchmark kernels in paired synchronous-baseline and asynchronous
coroutine forms, each with a host-side sequential reference for functional
verification.

Scales are desk scale: shrunk against the cache sizes so the working sets
still dwarf the caches, while a full latency sweep stays comfortably under
a minute per point. Every scale parameter takes an override.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field

from .core import compute, mem_access
from .engine import SimulationError
from .runtime import (AwaitAload, AwaitAstore, Compute, GuardEnd, GuardStart,
                      IssueAload, IssueAstore, ParkUntilLoopTurn,
                      SpmBlockAccess, WaitIds)

MASK64 = 2**64 - 1

LOCAL_BASE = 0x1000_0000
FAR_BASE = 0x8000_0000


class WorkloadError(SimulationError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass
class BenchmarkSpec:
    """Benchmark selection plus every tunable scale knob.

    Fields not relevant to a given kernel are ignored by it; the per-kernel
    defaults live in DEFAULTS and are merged in build().
    """

    name: str = "gups"
    seed: int = 1
    guarded: bool = False
    coroutines: int = 256
    batch: int = 8
    granularity: int = 8
    queue_length: int = 512
    table_words: int = 1 << 20
    updates: int = 100_000
    elements: int = 1 << 18
    searches: int = 2048
    nodes: int = 256
    lookups: int = 1024
    buckets: int = 16000
    build_tuples: int = 16000
    probes: int = 20000
    stream_words: int = 1 << 16
    stream_scalar: int = 3


DEFAULTS: dict[str, dict] = {
    "gups": dict(coroutines=256, batch=8, granularity=8, queue_length=2048),
    "bs": dict(coroutines=256, granularity=16, queue_length=512),
    "ll": dict(coroutines=256, granularity=24, queue_length=512),
    "ht": dict(coroutines=256, granularity=24, queue_length=512),
    "hj": dict(coroutines=256, granularity=48, queue_length=512),
    "stream": dict(coroutines=32, granularity=512, queue_length=256),
}


def build(name: str, seed: int, overrides: dict | None = None) -> "Workload":
    if name not in DEFAULTS:
        raise WorkloadError(f"unknown benchmark {name!r}; choose from {sorted(DEFAULTS)}")
    params = dict(DEFAULTS[name])
    params.update(overrides or {})
    spec = BenchmarkSpec(name=name, seed=seed, **params)
    cls = {"gups": Gups, "bs": BinarySearch, "ll": LinkedList,
           "ht": HashTable, "hj": HashJoin, "stream": StreamTriad}[name]
    return cls(spec)


class Workload:
    """Base class: memory layout, AMU setup, and the two execution forms."""

    def __init__(self, spec: BenchmarkSpec):
        self.spec = spec
        self.rng = random.Random(f"{spec.name}:{spec.seed}")
        self.results: list = []

    # memory the machine must map
    far_bytes = 0
    local_bytes = 1 << 20

    def prepare(self, machine) -> None:
        raise NotImplementedError

    def configure_amu(self, machine) -> None:
        amu = machine.amu
        amu.cfg_write("granularity", self.spec.granularity)
        amu.cfg_write("queue_base", 0)
        amu.cfg_write("queue_length", self.spec.queue_length)
        machine.runtime.configure_spm_data_area(self.spec.granularity)

    def baseline_records(self, machine):
        raise NotImplementedError

    def spawn_tasks(self, machine) -> None:
        raise NotImplementedError

    def verify(self, machine) -> tuple[bool, str]:
        raise NotImplementedError

    # -- shared helpers ---------------------------------------------------------

    def _retry_issue(self, op_cls, spm_addr, mem_addr):
        """Issue with yield-and-retry on ID exhaustion; returns the ID."""
        rid = yield op_cls(spm_addr, mem_addr)
        while rid == 0:
            yield ParkUntilLoopTurn()
            rid = yield op_cls(spm_addr, mem_addr)
        return rid

    @staticmethod
    def _slices(n_items: int, n_slices: int):
        base, rem = divmod(n_items, n_slices)
        start = 0
        for i in range(n_slices):
            size = base + (1 if i < rem else 0)
            if size:
                yield start, start + size
            start += size


# ---------------------------------------------------------------------------


class Gups(Workload):
    """Random read-modify-write updates over a far-memory table.

    The asynchronous form routes each update to the task owning its table
    index, so concurrent read-xor-write windows never overlap an address
    and the final table matches the sequential reference exactly. Each
    task pipelines a batch of updates per suspension. The guarded form
    instead serializes conflicts through the address guard table.
    """

    def __init__(self, spec: BenchmarkSpec):
        super().__init__(spec)
        if spec.table_words & (spec.table_words - 1):
            raise WorkloadError("gups table_words must be a power of two")
        self.table_base = FAR_BASE
        self.far_bytes = spec.table_words * 8
        self.updates: list[tuple[int, int]] = []
        mask = spec.table_words - 1
        for _ in range(spec.updates):
            r = self.rng.getrandbits(64)
            self.updates.append((r & mask, r))

    def prepare(self, machine) -> None:
        pass  # table starts zeroed; updates are XOR deltas

    def expected_table(self) -> dict[int, int]:
        acc: dict[int, int] = {}
        for idx, val in self.updates:
            acc[idx] = acc.get(idx, 0) ^ val
        return acc

    def baseline_records(self, machine):
        image = machine.image
        base = self.table_base
        prev_c = None
        for idx, val in self.updates:
            addr = base + idx * 8
            image.write_u64(addr, image.read_u64(addr) ^ val)
            c = compute(4, deps=(prev_c,) if prev_c else ())
            ld = mem_access(addr, 8, deps=(c,))
            x = compute(1, deps=(ld,))
            st = mem_access(addr, 8, deps=(x,))
            prev_c = c
            yield c
            yield ld
            yield x
            yield st

    def spawn_tasks(self, machine) -> None:
        spec = self.spec
        if spec.guarded:
            self._spawn_guarded(machine)
            return
        ntasks = spec.coroutines
        owned: list[list[tuple[int, int]]] = [[] for _ in range(ntasks)]
        for idx, val in self.updates:
            owned[idx % ntasks].append((self.table_base + idx * 8, val))
        rt = machine.runtime
        for t in range(ntasks):
            if not owned[t]:
                continue
            slots = [rt.spm_alloc.alloc() for _ in range(spec.batch)]
            rt.spawn(self._task(machine.hier, owned[t], slots))

    def _task(self, hier, updates, slots):
        B = len(slots)
        for lo in range(0, len(updates), B):
            batch = updates[lo:lo + B]
            ids = []
            for k, (addr, _val) in enumerate(batch):
                rid = yield from self._retry_issue(IssueAload, slots[k], addr)
                ids.append(rid)
            yield WaitIds(tuple(ids))
            ids = []
            for k, (addr, val) in enumerate(batch):
                hier.spm_write_u64(slots[k], hier.spm_read_u64(slots[k]) ^ val)
                yield Compute(2)
                yield SpmBlockAccess(2)
                rid = yield from self._retry_issue(IssueAstore, slots[k], addr)
                ids.append(rid)
            yield WaitIds(tuple(ids))

    def _spawn_guarded(self, machine) -> None:
        rt = machine.runtime
        for lo, hi in self._slices(len(self.updates), self.spec.coroutines):
            slot = rt.spm_alloc.alloc()
            rt.spawn(self._guarded_task(machine.hier, self.updates[lo:hi], slot))

    def _guarded_task(self, hier, updates, slot):
        base = self.table_base
        for idx, val in updates:
            addr = base + idx * 8
            yield Compute(4)
            yield GuardStart(addr)
            yield AwaitAload(slot, addr)
            hier.spm_write_u64(slot, hier.spm_read_u64(slot) ^ val)
            yield Compute(1)
            yield SpmBlockAccess(2)
            yield AwaitAstore(slot, addr)
            yield GuardEnd(addr)

    def verify(self, machine) -> tuple[bool, str]:
        image = machine.image
        for idx, want in sorted(self.expected_table().items()):
            got = image.read_u64(self.table_base + idx * 8)
            if got != want:
                return False, f"table[{idx}] = {got:#x}, expected {want:#x}"
        untouched = (self.updates[0][0] + 1) % self.spec.table_words
        if untouched not in self.expected_table():
            if image.read_u64(self.table_base + untouched * 8) != 0:
                return False, f"table[{untouched}] modified unexpectedly"
        return True, ""


# ---------------------------------------------------------------------------


class BinarySearch(Workload):
    """Request-parallel binary search over a sorted far-memory array of
    16-byte records (8-byte key prefix, 8-byte payload)."""

    REC = 16

    def __init__(self, spec: BenchmarkSpec):
        super().__init__(spec)
        self.n = spec.elements
        self.base = FAR_BASE
        self.far_bytes = self.n * self.REC
        self.keys = []
        for _ in range(spec.searches):
            if self.rng.random() < 0.5:
                self.keys.append(2 * self.rng.randrange(self.n))  # present
            else:
                self.keys.append(2 * self.rng.randrange(self.n) + 1)  # absent

    def prepare(self, machine) -> None:
        image = machine.image
        chunk_entries = 256
        for lo in range(0, self.n, chunk_entries):
            hi = min(lo + chunk_entries, self.n)
            buf = bytearray((hi - lo) * self.REC)
            for i in range(lo, hi):
                struct.pack_into("<QQ", buf, (i - lo) * self.REC, 2 * i, i * 7 + 1)
            image.write(self.base + lo * self.REC, bytes(buf))

    def reference(self) -> list[int]:
        out = []
        for key in self.keys:
            idx = key // 2
            out.append(idx * 7 + 1 if key % 2 == 0 and idx < self.n else 0)
        return out

    def _probe_path(self, key):
        lo, hi = 0, self.n
        while lo < hi:
            mid = (lo + hi) // 2
            yield mid
            if 2 * mid == key:
                return
            if 2 * mid < key:
                lo = mid + 1
            else:
                hi = mid

    def baseline_records(self, machine):
        image = machine.image
        self.results = [0] * len(self.keys)
        for si, key in enumerate(self.keys):
            prev = None
            for mid in self._probe_path(key):
                c = compute(3, deps=(prev,) if prev else ())
                ld = mem_access(self.base + mid * self.REC, self.REC, deps=(c,))
                prev = ld
                yield c
                yield ld
                if 2 * mid == key:
                    self.results[si] = image.read_u64(self.base + mid * self.REC + 8)

    def spawn_tasks(self, machine) -> None:
        rt = machine.runtime
        self.results = [0] * len(self.keys)
        for lo, hi in self._slices(len(self.keys), self.spec.coroutines):
            slot = rt.spm_alloc.alloc()
            rt.spawn(self._task(machine.hier, lo, hi, slot))

    def _task(self, hier, lo, hi, slot):
        for si in range(lo, hi):
            key = self.keys[si]
            for mid in self._probe_path(key):
                yield Compute(3)
                yield AwaitAload(slot, self.base + mid * self.REC)
                yield SpmBlockAccess(1)
                yield Compute(2)
                if 2 * mid == key:
                    self.results[si] = hier.spm_read_u64(slot + 8)

    def verify(self, machine) -> tuple[bool, str]:
        ref = self.reference()
        if self.results == ref:
            return True, ""
        for i, (got, want) in enumerate(zip(self.results, ref)):
            if got != want:
                return False, f"search {i} (key {self.keys[i]}): got {got}, want {want}"
        return False, "result count mismatch"


# ---------------------------------------------------------------------------


class LinkedList(Workload):
    """Hand-over-hand lookups over a far-memory sorted linked list; node =
    8-byte key, 8-byte value, 8-byte next pointer, placed in shuffled order."""

    STRIDE = 32  # 24-byte nodes padded so none straddles a cache line

    def __init__(self, spec: BenchmarkSpec):
        super().__init__(spec)
        self.n = spec.nodes
        self.base = FAR_BASE
        self.far_bytes = self.n * self.STRIDE
        perm = list(range(self.n))
        self.rng.shuffle(perm)
        self.slot_of = perm  # node i (key 2i) lives at slot perm[i]
        self.targets = [self.rng.randrange(2 * self.n + 1) for _ in range(spec.lookups)]

    def node_addr(self, i: int) -> int:
        return self.base + self.slot_of[i] * self.STRIDE

    def prepare(self, machine) -> None:
        image = machine.image
        for i in range(self.n):
            nxt = self.node_addr(i + 1) if i + 1 < self.n else 0
            image.write(self.node_addr(i), struct.pack("<QQQ", 2 * i, 2 * i + 7, nxt))

    def reference(self) -> list[int]:
        out = []
        for t in self.targets:
            idx = (t + 1) // 2  # first node with key >= t
            out.append(2 * idx + 7 if idx < self.n and 2 * idx == t else 0)
        return out

    def baseline_records(self, machine):
        image = machine.image
        self.results = [0] * len(self.targets)
        for si, target in enumerate(self.targets):
            prev = None
            addr = self.node_addr(0) if self.n else 0
            while addr:
                ld = mem_access(addr, 24, deps=(prev,) if prev else ())
                c = compute(2, deps=(ld,))
                prev = c
                yield ld
                yield c
                key, val, nxt = struct.unpack("<QQQ", image.read(addr, 24))
                if key >= target:
                    if key == target:
                        self.results[si] = val
                    break
                addr = nxt

    def spawn_tasks(self, machine) -> None:
        rt = machine.runtime
        self.results = [0] * len(self.targets)
        for lo, hi in self._slices(len(self.targets), self.spec.coroutines):
            slot = rt.spm_alloc.alloc()
            rt.spawn(self._task(machine.hier, lo, hi, slot))

    def _task(self, hier, lo, hi, slot):
        for si in range(lo, hi):
            target = self.targets[si]
            addr = self.node_addr(0) if self.n else 0
            while addr:
                yield AwaitAload(slot, addr)
                yield SpmBlockAccess(2)
                yield Compute(2)
                key, val, nxt = struct.unpack("<QQQ", hier.spm_read(slot, 24))
                if key >= target:
                    if key == target:
                        self.results[si] = val
                    break
                addr = nxt

    def verify(self, machine) -> tuple[bool, str]:
        ref = self.reference()
        if self.results == ref:
            return True, ""
        for i, (got, want) in enumerate(zip(self.results, ref)):
            if got != want:
                return False, f"lookup {i} (target {self.targets[i]}): got {got}, want {want}"
        return False, "result count mismatch"


# ---------------------------------------------------------------------------


class HashTable(Workload):
    """Chained hash table lookups; bucket heads and 24-byte nodes in far
    memory. The guarded form brackets each lookup with an address guard on
    its bucket, which is what the disambiguation-overhead sweep measures."""

    STRIDE = 32

    def __init__(self, spec: BenchmarkSpec):
        super().__init__(spec)
        self.m = spec.buckets
        self.heads_base = FAR_BASE
        self.nodes_base = FAR_BASE + self._round_line(self.m * 8)
        self.far_bytes = self._round_line(self.m * 8) + spec.build_tuples * self.STRIDE
        keys = set()
        while len(keys) < spec.build_tuples:
            keys.add(self.rng.getrandbits(48))
        self.build_keys = sorted(keys)
        self.rng.shuffle(self.build_keys)
        present = [self.rng.choice(self.build_keys) for _ in range(spec.lookups // 2)]
        absent = []
        while len(absent) < spec.lookups - len(present):
            k = self.rng.getrandbits(48)
            if k not in keys:
                absent.append(k)
        mixed = present + absent
        self.rng.shuffle(mixed)
        self.lookup_keys = mixed
        # host-side mirror of the chains, built exactly like the image
        self.chains: dict[int, list[int]] = {}

    @staticmethod
    def _round_line(n: int) -> int:
        return (n + 63) & ~63

    def _bucket(self, key: int) -> int:
        return splitmix64(key) % self.m

    def _value(self, key: int) -> int:
        return splitmix64(key ^ 0xFEED) & MASK64

    def node_addr(self, i: int) -> int:
        return self.nodes_base + i * self.STRIDE

    def head_addr(self, b: int) -> int:
        return self.heads_base + b * 8

    def prepare(self, machine) -> None:
        image = machine.image
        for i, key in enumerate(self.build_keys):
            b = self._bucket(key)
            head = image.read_u64(self.head_addr(b))
            image.write(self.node_addr(i), struct.pack("<QQQ", key, self._value(key), head))
            image.write_u64(self.head_addr(b), self.node_addr(i))
            self.chains.setdefault(b, []).insert(0, key)

    def reference(self) -> list[int]:
        present = set(self.build_keys)
        return [self._value(k) if k in present else 0 for k in self.lookup_keys]

    def baseline_records(self, machine):
        image = machine.image
        self.results = [0] * len(self.lookup_keys)
        for si, key in enumerate(self.lookup_keys):
            h = compute(4)
            ld = mem_access(self.head_addr(self._bucket(key)), 8, deps=(h,))
            yield h
            yield ld
            addr = image.read_u64(self.head_addr(self._bucket(key)))
            prev = ld
            while addr:
                nd = mem_access(addr, 24, deps=(prev,))
                c = compute(2, deps=(nd,))
                prev = c
                yield nd
                yield c
                nkey, nval, nxt = struct.unpack("<QQQ", image.read(addr, 24))
                if nkey == key:
                    self.results[si] = nval
                    break
                addr = nxt

    def spawn_tasks(self, machine) -> None:
        rt = machine.runtime
        self.results = [0] * len(self.lookup_keys)
        for lo, hi in self._slices(len(self.lookup_keys), self.spec.coroutines):
            slot = rt.spm_alloc.alloc()
            rt.spawn(self._task(machine.hier, lo, hi, slot))

    def _task(self, hier, lo, hi, slot):
        guarded = self.spec.guarded
        for si in range(lo, hi):
            key = self.lookup_keys[si]
            bucket = self.head_addr(self._bucket(key))
            yield Compute(4)
            if guarded:
                yield GuardStart(bucket)
            yield AwaitAload(slot, bucket)
            yield SpmBlockAccess(1)
            addr = hier.spm_read_u64(slot)
            while addr:
                yield AwaitAload(slot, addr)
                yield SpmBlockAccess(2)
                yield Compute(2)
                nkey, nval, nxt = struct.unpack("<QQQ", hier.spm_read(slot, 24))
                if nkey == key:
                    self.results[si] = nval
                    break
                addr = nxt
            if guarded:
                yield GuardEnd(bucket)

    def verify(self, machine) -> tuple[bool, str]:
        ref = self.reference()
        if self.results == ref:
            return True, ""
        for i, (got, want) in enumerate(zip(self.results, ref)):
            if got != want:
                return False, f"lookup {i} (key {self.lookup_keys[i]:#x}): got {got}, want {want}"
        return False, "result count mismatch"


# ---------------------------------------------------------------------------


class HashJoin(Workload):
    """Probe phase of a chained hash join: 48-byte build nodes in far
    memory, loop-parallel probe stream accumulating matched payloads."""

    STRIDE = 64  # 48-byte nodes padded to line alignment

    def __init__(self, spec: BenchmarkSpec):
        super().__init__(spec)
        self.m = spec.buckets
        self.heads_base = FAR_BASE
        self.nodes_base = FAR_BASE + ((self.m * 8 + 63) & ~63)
        self.far_bytes = ((self.m * 8 + 63) & ~63) + spec.build_tuples * self.STRIDE
        keys = set()
        while len(keys) < spec.build_tuples:
            keys.add(self.rng.getrandbits(48))
        self.build_keys = list(keys)
        self.rng.shuffle(self.build_keys)
        probes = []
        for _ in range(spec.probes):
            if self.rng.random() < 0.8:
                probes.append(self.rng.choice(self.build_keys))
            else:
                probes.append(self.rng.getrandbits(48))
        self.probe_keys = probes

    def _bucket(self, key: int) -> int:
        return splitmix64(key ^ 0x7177) % self.m

    def _payload(self, key: int) -> int:
        return splitmix64(key ^ 0xBEEF) & MASK64

    def head_addr(self, b: int) -> int:
        return self.heads_base + b * 8

    def node_addr(self, i: int) -> int:
        return self.nodes_base + i * self.STRIDE

    def prepare(self, machine) -> None:
        image = machine.image
        for i, key in enumerate(self.build_keys):
            b = self._bucket(key)
            head = image.read_u64(self.head_addr(b))
            node = struct.pack("<QQ", key, self._payload(key)) + bytes(24) + struct.pack("<Q", head)
            image.write(self.node_addr(i), node)
            image.write_u64(self.head_addr(b), self.node_addr(i))

    def reference(self) -> list[int]:
        present = set(self.build_keys)
        return [self._payload(k) if k in present else 0 for k in self.probe_keys]

    @staticmethod
    def _node_fields(raw: bytes) -> tuple[int, int, int]:
        key, payload = struct.unpack_from("<QQ", raw, 0)
        (nxt,) = struct.unpack_from("<Q", raw, 40)
        return key, payload, nxt

    def baseline_records(self, machine):
        image = machine.image
        self.results = [0] * len(self.probe_keys)
        for si, key in enumerate(self.probe_keys):
            h = compute(4)
            ld = mem_access(self.head_addr(self._bucket(key)), 8, deps=(h,))
            yield h
            yield ld
            addr = image.read_u64(self.head_addr(self._bucket(key)))
            prev = ld
            while addr:
                nd = mem_access(addr, 48, deps=(prev,))
                c = compute(2, deps=(nd,))
                prev = c
                yield nd
                yield c
                nkey, payload, nxt = self._node_fields(image.read(addr, 48))
                if nkey == key:
                    self.results[si] = payload
                    break
                addr = nxt

    def spawn_tasks(self, machine) -> None:
        rt = machine.runtime
        self.results = [0] * len(self.probe_keys)
        for lo, hi in self._slices(len(self.probe_keys), self.spec.coroutines):
            slot = rt.spm_alloc.alloc()
            rt.spawn(self._task(machine.hier, lo, hi, slot))

    def _task(self, hier, lo, hi, slot):
        for si in range(lo, hi):
            key = self.probe_keys[si]
            yield Compute(4)
            yield AwaitAload(slot, self.head_addr(self._bucket(key)))
            yield SpmBlockAccess(1)
            addr = hier.spm_read_u64(slot)
            while addr:
                yield AwaitAload(slot, addr)
                yield SpmBlockAccess(2)
                yield Compute(2)
                nkey, payload, nxt = self._node_fields(hier.spm_read(slot, 48))
                if nkey == key:
                    self.results[si] = payload
                    break
                addr = nxt

    def verify(self, machine) -> tuple[bool, str]:
        ref = self.reference()
        if self.results == ref:
            return True, ""
        for i, (got, want) in enumerate(zip(self.results, ref)):
            if got != want:
                return False, f"probe {i} (key {self.probe_keys[i]:#x}): got {got}, want {want}"
        return False, "result count mismatch"


# ---------------------------------------------------------------------------


class StreamTriad(Workload):
    """Integer triad c[i] = a[i] + s*b[i] over far-memory arrays, moved in
    large-granularity chunks through the scratchpad."""

    def __init__(self, spec: BenchmarkSpec):
        super().__init__(spec)
        self.n = spec.stream_words
        if (self.n * 8) % spec.granularity:
            raise WorkloadError("stream size must be a multiple of the granularity")
        self.a = FAR_BASE
        self.b = FAR_BASE + self.n * 8
        self.c = FAR_BASE + 2 * self.n * 8
        self.far_bytes = 3 * self.n * 8

    def _aval(self, i: int) -> int:
        return splitmix64(i * 2 + 1)

    def _bval(self, i: int) -> int:
        return splitmix64(i * 2 + 2)

    def prepare(self, machine) -> None:
        image = machine.image
        chunk = 512
        for lo in range(0, self.n, chunk):
            hi = min(lo + chunk, self.n)
            abuf = b"".join(self._aval(i).to_bytes(8, "little") for i in range(lo, hi))
            bbuf = b"".join(self._bval(i).to_bytes(8, "little") for i in range(lo, hi))
            image.write(self.a + lo * 8, abuf)
            image.write(self.b + lo * 8, bbuf)

    def _cval(self, i: int) -> int:
        return (self._aval(i) + self.spec.stream_scalar * self._bval(i)) & MASK64

    def baseline_records(self, machine):
        image = machine.image
        for off in range(0, self.n * 8, 64):
            la = mem_access(self.a + off, 64)
            lb = mem_access(self.b + off, 64)
            cc = compute(24, deps=(la, lb))
            st = mem_access(self.c + off, 64, deps=(cc,))
            base_i = off // 8
            cbuf = b"".join(self._cval(base_i + k).to_bytes(8, "little") for k in range(8))
            image.write(self.c + off, cbuf)
            yield la
            yield lb
            yield cc
            yield st

    def spawn_tasks(self, machine) -> None:
        rt = machine.runtime
        g = self.spec.granularity
        chunks = [off for off in range(0, self.n * 8, g)]
        for lo, hi in self._slices(len(chunks), self.spec.coroutines):
            slots = (rt.spm_alloc.alloc(), rt.spm_alloc.alloc(), rt.spm_alloc.alloc())
            rt.spawn(self._task(machine.hier, chunks[lo:hi], slots))

    def _task(self, hier, offsets, slots):
        g = self.spec.granularity
        words = g // 8
        s = self.spec.stream_scalar
        sa, sb, sc = slots
        for off in offsets:
            ida = yield from self._retry_issue(IssueAload, sa, self.a + off)
            idb = yield from self._retry_issue(IssueAload, sb, self.b + off)
            yield WaitIds((ida, idb))
            araw = hier.spm_read(sa, g)
            braw = hier.spm_read(sb, g)
            avals = struct.unpack(f"<{words}Q", araw)
            bvals = struct.unpack(f"<{words}Q", braw)
            cvals = [(x + s * y) & MASK64 for x, y in zip(avals, bvals)]
            hier.spm_write(sc, struct.pack(f"<{words}Q", *cvals))
            yield Compute(3 * words)
            for _ in range(3):
                yield SpmBlockAccess(words)
            yield AwaitAstore(sc, self.c + off)

    def verify(self, machine) -> tuple[bool, str]:
        image = machine.image
        for i in range(self.n):
            got = image.read_u64(self.c + i * 8)
            want = self._cval(i)
            if got != want:
                return False, f"c[{i}] = {got:#x}, expected {want:#x}"
        return True, ""
