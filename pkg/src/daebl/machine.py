"""Timing model of a two-cluster big.LITTLE machine.

Time is kept in integer *ticks*. One tick is ``1 / lcm(f_big, f_little)``
microseconds, so each core's clock period is a whole number of ticks (with
the default 2000/1400 MHz pair a tick is 1/14 ns, a big cycle 7 ticks and a
LITTLE cycle 10 ticks). Latencies are configured in nanoseconds and rounded
up to whole cycles of the core that observes them.

Caches are set-associative LRU, write-allocate. A miss does not install the
line immediately: it registers a pending fill that lands in the requesting
cluster's L1 and L2 at ``issue + latency``. Later requests to a pending line
merge with it. The other cluster's L2 is probed (read-only, no LRU update)
before main memory.
"""

from __future__ import annotations

import functools
import heapq
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator

from daebl.kernel_ir import ADDR, COMPUTE, LOAD, PREFETCH, STORE, Instr, ValidatedKernel

BIG = 0
LITTLE = 1

INORDER = "inorder"
OUTOFORDER = "ooo"

# uop kinds
U_ALU = 0
U_LOAD = 1
U_STORE = 2
U_PREF = 3

L1 = "L1"
LOCAL_L2 = "LocalL2"
REMOTE = "RemoteCluster"
MEMORY = "Memory"
INFLIGHT = "InFlight"
SOURCES = (L1, LOCAL_L2, REMOTE, MEMORY, INFLIGHT)

LINE_SIZE = 64
LINE_SHIFT = 6


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CacheConfig:
    size: int
    assoc: int
    hit_ns: float
    line: int = LINE_SIZE

    @property
    def sets(self) -> int:
        return self.size // (self.line * self.assoc)


@dataclass(frozen=True)
class CoreConfig:
    kind: str
    frequency_mhz: int
    issue_width: int = 1
    mlp_degree: int = 1
    window: int = 1

    def __post_init__(self):
        if self.kind == INORDER and (self.issue_width, self.mlp_degree, self.window) != (1, 1, 1):
            raise ConfigError("in-order cores have issue width, MLP degree and window fixed at 1")


@dataclass(frozen=True)
class ClusterConfig:
    name: str
    core: CoreConfig
    l1d: CacheConfig
    l2: CacheConfig
    prefetch_queue_depth: int = 8
    f_min_mhz: int = 200
    f_max_mhz: int = 2000


@dataclass(frozen=True)
class MemorySystemConfig:
    coherence_ns: float = 68.0
    memory_ns: float = 95.0


@dataclass(frozen=True)
class MachineConfig:
    big: ClusterConfig
    little: ClusterConfig
    memory: MemorySystemConfig = MemorySystemConfig()
    lock_cost_ns: float = 1500.0
    spawn_join_cost_ns: float = 30000.0
    signal_cost_ns: float = 200.0
    inner_loop_ops: int = 1
    outer_loop_ops: int = 2

    def cluster(self, which: int) -> ClusterConfig:
        return self.big if which == BIG else self.little

    @property
    def tick_mhz(self) -> int:
        return math.lcm(self.big.core.frequency_mhz, self.little.core.frequency_mhz)

    def period(self, which: int) -> int:
        """Clock period of a cluster's core in ticks."""
        return self.tick_mhz // self.cluster(which).core.frequency_mhz

    def ns_to_ticks(self, ns: float) -> int:
        return int(round(ns * self.tick_mhz / 1000))

    def ticks_to_ns(self, ticks: int) -> float:
        return ticks * 1000 / self.tick_mhz

    def cycles(self, which: int, ns: float) -> int:
        """Nanoseconds to whole cycles (rounded up) of a cluster's core."""
        f = self.cluster(which).core.frequency_mhz
        return max(1, math.ceil(round(ns * f / 1000, 9)))

    def latencies(self, which: int) -> dict[str, int]:
        c = self.cluster(which)
        return {
            L1: self.cycles(which, c.l1d.hit_ns),
            LOCAL_L2: self.cycles(which, c.l2.hit_ns),
            REMOTE: self.cycles(which, self.memory.coherence_ns),
            MEMORY: self.cycles(which, self.memory.memory_ns),
        }

    def scaled_latencies(self, factor: float) -> "MachineConfig":
        """Copy with every cache/coherence/memory latency multiplied by ``factor``."""
        def cl(c: ClusterConfig) -> ClusterConfig:
            return replace(c, l1d=replace(c.l1d, hit_ns=c.l1d.hit_ns * factor),
                           l2=replace(c.l2, hit_ns=c.l2.hit_ns * factor))
        mem = MemorySystemConfig(self.memory.coherence_ns * factor, self.memory.memory_ns * factor)
        return replace(self, big=cl(self.big), little=cl(self.little), memory=mem)


def validate_machine(m: MachineConfig) -> MachineConfig:
    for which in (BIG, LITTLE):
        c = m.cluster(which)
        core = c.core
        if core.kind not in (INORDER, OUTOFORDER):
            raise ConfigError(f"{c.name}: unknown core kind {core.kind!r}")
        if not c.f_min_mhz <= core.frequency_mhz <= c.f_max_mhz:
            raise ConfigError(f"{c.name}: frequency {core.frequency_mhz} outside "
                              f"[{c.f_min_mhz}, {c.f_max_mhz}] MHz")
        if min(core.issue_width, core.mlp_degree, core.window) < 1:
            raise ConfigError(f"{c.name}: issue width, MLP degree and window must be >= 1")
        for cache in (c.l1d, c.l2):
            if cache.line != LINE_SIZE:
                raise ConfigError(f"{c.name}: line size must be {LINE_SIZE} bytes")
            if cache.size % (cache.line * cache.assoc) or cache.sets < 1:
                raise ConfigError(f"{c.name}: cache size not a multiple of line * assoc")
            if cache.hit_ns <= 0:
                raise ConfigError(f"{c.name}: cache latency must be positive")
        if c.l1d.size > c.l2.size:
            raise ConfigError(f"{c.name}: L1 larger than L2")
        if c.prefetch_queue_depth < 0:
            raise ConfigError(f"{c.name}: negative prefetch queue depth")
        lat = m.latencies(which)
        if not lat[L1] < lat[LOCAL_L2] < lat[REMOTE] < lat[MEMORY]:
            raise ConfigError(f"{c.name}: latencies must satisfy L1 < L2 < coherence < memory, got {lat}")
    if m.memory.coherence_ns >= m.memory.memory_ns:
        raise ConfigError("coherence latency must be below memory latency")
    for name in ("lock_cost_ns", "spawn_join_cost_ns", "signal_cost_ns"):
        if getattr(m, name) < 0:
            raise ConfigError(f"{name} must be >= 0")
    if m.inner_loop_ops < 0 or m.outer_loop_ops < 0:
        raise ConfigError("loop overhead op counts must be >= 0")
    return m


def exynos5422() -> MachineConfig:
    """Exynos 5422 cluster layout with calibrated interconnect latencies."""
    big = ClusterConfig(
        "big",
        CoreConfig(OUTOFORDER, 2000, issue_width=3, mlp_degree=6, window=64),
        l1d=CacheConfig(32 * 1024, 2, 2.0),
        l2=CacheConfig(2 * 1024 * 1024, 16, 8.0),
        prefetch_queue_depth=8,
        f_min_mhz=200, f_max_mhz=2000,
    )
    little = ClusterConfig(
        "LITTLE",
        CoreConfig(INORDER, 1400),
        l1d=CacheConfig(32 * 1024, 4, 2.0),
        l2=CacheConfig(512 * 1024, 8, 8.0),
        prefetch_queue_depth=8,
        f_min_mhz=200, f_max_mhz=1400,
    )
    return validate_machine(MachineConfig(big, little))


def machine_to_dict(m: MachineConfig) -> dict:
    return asdict(m)


def machine_from_dict(d: dict) -> MachineConfig:
    def cluster(c: dict) -> ClusterConfig:
        return ClusterConfig(
            c["name"], CoreConfig(**c["core"]), CacheConfig(**c["l1d"]), CacheConfig(**c["l2"]),
            c.get("prefetch_queue_depth", 8), c.get("f_min_mhz", 200), c.get("f_max_mhz", 2000))
    rest = {k: v for k, v in d.items() if k not in ("big", "little", "memory")}
    return validate_machine(MachineConfig(
        cluster(d["big"]), cluster(d["little"]), MemorySystemConfig(**d.get("memory", {})), **rest))


def load_machine(path: str | Path) -> MachineConfig:
    try:
        return machine_from_dict(json.loads(Path(path).read_text()))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_machine(m: MachineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(machine_to_dict(m), indent=2) + "\n")


class Cache:
    """Set-associative LRU cache over line numbers.

    Each set is a dict used as an ordered LRU stack, least recent first.
    """

    def __init__(self, cfg: CacheConfig):
        self.nsets = cfg.sets
        self.assoc = cfg.assoc
        self.sets: list[dict[int, None]] = [{} for _ in range(self.nsets)]

    def __contains__(self, line: int) -> bool:
        return line in self.sets[line % self.nsets]

    def touch(self, line: int) -> bool:
        s = self.sets[line % self.nsets]
        if line in s:
            del s[line]
            s[line] = None
            return True
        return False

    def insert(self, line: int) -> int | None:
        """Install (or refresh) ``line`` as most recent; returns the evicted line."""
        s = self.sets[line % self.nsets]
        if line in s:
            del s[line]
            s[line] = None
            return None
        victim = None
        if len(s) >= self.assoc:
            victim = next(iter(s))
            del s[victim]
        s[line] = None
        return victim

    def lines(self) -> set[int]:
        return {ln for s in self.sets for ln in s}

    def lru_order(self, set_index: int) -> list[int]:
        return list(self.sets[set_index])


@dataclass
class ServiceResult:
    source: str
    latency_cycles: int


class ClusterState:
    def __init__(self, which: int, m: MachineConfig):
        c = m.cluster(which)
        self.which = which
        self.l1 = Cache(c.l1d)
        self.l2 = Cache(c.l2)
        self.lat = m.latencies(which)
        self.period = m.period(which)
        self.queue_depth = c.prefetch_queue_depth
        # line -> [arrival tick, source, is_prefetch]
        self.pending: dict[int, list] = {}
        self.prefetches_in_flight = 0


class MemorySystem:
    """Shared cache state of both clusters plus the fill queue.

    Timed operations take the current tick; fills due at or before that tick
    must have been applied with :meth:`advance` first (the simulators do this
    before resuming a core).
    """

    def __init__(self, m: MachineConfig):
        self.machine = m
        self.clusters = (ClusterState(BIG, m), ClusterState(LITTLE, m))
        self.fills: list[tuple[int, int, int, int]] = []
        self._seq = 0
        self.dropped = [0, 0]

    def advance(self, tick: int) -> None:
        fills = self.fills
        while fills and fills[0][0] <= tick:
            _, _, which, line = heapq.heappop(fills)
            cl = self.clusters[which]
            entry = cl.pending.pop(line)
            if entry[2]:
                cl.prefetches_in_flight -= 1
            cl.l2.insert(line)
            cl.l1.insert(line)

    def next_fill(self, which: int, after: int) -> int | None:
        """Earliest pending arrival for a cluster strictly after ``after``."""
        pend = self.clusters[which].pending
        return min((e[0] for e in pend.values() if e[0] > after), default=None)

    def _register(self, cl: ClusterState, line: int, arrival: int, source: str, prefetch: bool) -> None:
        cl.pending[line] = [arrival, source, prefetch]
        self._seq += 1
        heapq.heappush(self.fills, (arrival, self._seq, cl.which, line))

    def _miss_source(self, cl: ClusterState, line: int) -> str:
        if cl.l2.touch(line):
            return LOCAL_L2
        if line in self.clusters[1 - cl.which].l2:
            return REMOTE
        return MEMORY

    # --- untimed functional access (installs immediately) ---

    def access(self, which: int, address: int, kind: str = "load") -> ServiceResult:
        cl = self.clusters[which]
        line = address >> LINE_SHIFT
        if cl.l1.touch(line):
            src = L1
        else:
            src = self._miss_source(cl, line)
            cl.l2.insert(line)
            cl.l1.insert(line)
        return ServiceResult(src, cl.lat[src])

    # --- timed operations used by the cores ---

    def probe(self, which: int, line: int) -> int:
        """0: L1 hit, 1: in flight, 2: miss. No state change."""
        cl = self.clusters[which]
        if line in cl.l1:
            return 0
        if line in cl.pending:
            return 1
        return 2

    def load(self, which: int, line: int, tick: int) -> tuple[str, int]:
        """Timed demand load; returns (source, completion tick)."""
        cl = self.clusters[which]
        if cl.l1.touch(line):
            return L1, tick + cl.lat[L1] * cl.period
        entry = cl.pending.get(line)
        if entry is not None:
            return INFLIGHT, max(tick + cl.lat[L1] * cl.period, entry[0])
        src = self._miss_source(cl, line)
        done = tick + cl.lat[src] * cl.period
        self._register(cl, line, done, src, False)
        return src, done

    def try_load(self, which: int, line: int, tick: int, can_miss: bool):
        """Like :meth:`load` but returns None for a miss when ``can_miss`` is false.

        Returns (source, completion tick, whether a new miss was started).
        """
        cl = self.clusters[which]
        if cl.l1.touch(line):
            return L1, tick + cl.lat[L1] * cl.period, False
        entry = cl.pending.get(line)
        if entry is not None:
            return INFLIGHT, max(tick + cl.lat[L1] * cl.period, entry[0]), False
        if not can_miss:
            return None
        src = self._miss_source(cl, line)
        done = tick + cl.lat[src] * cl.period
        self._register(cl, line, done, src, False)
        return src, done, True

    def store(self, which: int, line: int, tick: int) -> str:
        cl = self.clusters[which]
        if cl.l1.touch(line):
            return L1
        if line in cl.pending:
            return INFLIGHT
        src = self._miss_source(cl, line)
        cl.l2.insert(line)
        cl.l1.insert(line)
        return src

    def issue_prefetch(self, which: int, address: int, tick: int) -> bool:
        """Non-blocking prefetch hint. Returns False when dropped."""
        cl = self.clusters[which]
        line = address >> LINE_SHIFT
        if line in cl.l1 or line in cl.pending or line in cl.l2:
            return True
        if cl.prefetches_in_flight >= cl.queue_depth:
            self.dropped[which] += 1
            return False
        src = REMOTE if line in self.clusters[1 - which].l2 else MEMORY
        self._register(cl, line, tick + cl.lat[src] * cl.period, src, True)
        cl.prefetches_in_flight += 1
        return True


@dataclass
class Program:
    """Flat instruction list for one slice (or loop-control block) of a phase.

    Every entry is one IR instruction: ``ops[j]`` is its op count (AddrCalc
    and Compute carry their cost, memory instructions 1) and ``deps[j]``
    holds the backward distances to the entries whose results it reads, so
    any contiguous run of whole iterations is itself a valid program.
    ``iter_starts[t]`` is the first entry of the t-th iteration covered.
    """

    kinds: list[int]
    ops: list[int]
    addrs: list[int]
    deps: list[tuple[int, ...]]
    iter_starts: list[int] = field(default_factory=lambda: [0])

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def total_ops(self) -> int:
        return sum(self.ops)

    @property
    def prefetches(self) -> int:
        return self.kinds.count(U_PREF)

    def iterations(self, lo: int, hi: int) -> "Program":
        """Sub-program for iterations [lo, hi) relative to this program's first."""
        a, b = self.iter_starts[lo], self.iter_starts[hi]
        return Program(self.kinds[a:b], self.ops[a:b], self.addrs[a:b], self.deps[a:b],
                       [x - a for x in self.iter_starts[lo:hi + 1]])


@functools.lru_cache(maxsize=32)
def phase_program(kernel: ValidatedKernel, body: tuple[Instr, ...], inner_loop_ops: int = 0) -> Program:
    """Program for all N iterations of ``body``; slices are cut from it."""
    kinds: list[int] = []
    ops: list[int] = []
    addrs: list[int] = []
    deps: list[tuple[int, ...]] = []
    starts = [0]
    streams = {ins.id: kernel.streams[ins.id].tolist() for ins in body if ins.addr is not None}
    active = {name: mask.tolist() for name, mask in kernel.active.items()}
    body_ops = [(ins.id, ins.kind, ins.cost, ins.operands(), ins.predicate) for ins in body]
    ukind = {ADDR: U_ALU, COMPUTE: U_ALU, LOAD: U_LOAD, STORE: U_STORE, PREFETCH: U_PREF}
    for i in range(kernel.iterations):
        last: dict[int, int] = {}
        for iid, kind, cost, operands, pred in body_ops:
            if pred is not None and not active[pred][i]:
                continue
            j = len(kinds)
            deps.append(tuple(j - last[x] for x in operands if x in last))
            last[iid] = j
            kinds.append(ukind[kind])
            if kind == ADDR or kind == COMPUTE:
                ops.append(cost)
                addrs.append(-1)
            else:
                ops.append(1)
                addrs.append(streams[iid][i])
        if inner_loop_ops:
            kinds.append(U_ALU)
            ops.append(inner_loop_ops)
            addrs.append(-1)
            deps.append(())
        starts.append(len(kinds))
    return Program(kinds, ops, addrs, deps, starts)


def build_program(kernel: ValidatedKernel, body: tuple[Instr, ...], iters: range,
                  inner_loop_ops: int = 0) -> Program:
    """Program for a contiguous iteration range; each iteration ends with a loop-overhead entry."""
    if iters.step != 1:
        raise ValueError("iteration range must be contiguous")
    return phase_program(kernel, tuple(body), inner_loop_ops).iterations(iters.start, iters.stop)


def loop_control_program(ops: int) -> Program:
    if ops == 0:
        return Program([], [], [], [])
    return Program([U_ALU], [ops], [-1], [()], [0, 1])


@dataclass
class SliceResult:
    cycles: int = 0
    retired: int = 0
    stall_cycles: int = 0
    sources: dict[str, int] = field(default_factory=dict)
    loads: int = 0
    load_latency_cycles: int = 0
    prefetches_dropped: int = 0


@dataclass(frozen=True)
class CoreTiming:
    which: int
    period: int
    width: int
    window: int
    mlp: int
    inorder: bool

    @classmethod
    def of(cls, m: MachineConfig, which: int) -> "CoreTiming":
        core = m.cluster(which).core
        return cls(which, m.period(which), core.issue_width, core.window, core.mlp_degree,
                   core.kind == INORDER)


Hook = Callable[[int, int], None]


class Clock:
    """Shared flag telling a running slice whether it is the only active core.

    When ``solo`` is set the slice applies due fills itself instead of
    yielding to the driver at every memory cycle.
    """

    __slots__ = ("solo",)

    def __init__(self, solo: bool = False):
        self.solo = solo


def run_slice(core: CoreTiming, mem: MemorySystem, prog: Program, start: int,
              on_prefetch: Hook | None = None, clock: Clock | None = None) -> Iterator[int]:
    """Generator simulating one program on one core.

    Yields the tick of every cycle in which it touches shared memory state;
    the driver must apply fills up to that tick and keep global time order
    across cores before resuming it. Returns a :class:`SliceResult`.
    ``on_prefetch(count, tick)`` is called after each prefetch issue.
    """
    clock = clock or Clock()
    if core.inorder:
        return (yield from _run_inorder(core, mem, prog, start, on_prefetch, clock))
    return (yield from _run_ooo(core, mem, prog, start, on_prefetch, clock))


def _run_inorder(core, mem, prog, start, on_prefetch, clock):
    kinds, ops, addrs = prog.kinds, prog.ops, prog.addrs
    which, period = core.which, core.period
    res = SliceResult(sources={})
    src_count = res.sources
    c = 0
    npref = 0
    for j in range(len(kinds)):
        k = kinds[j]
        if k == U_ALU:
            c += ops[j]
            continue
        tick = start + c * period
        if clock.solo:
            mem.advance(tick)
        else:
            yield tick
        if k == U_LOAD:
            src, done = mem.load(which, addrs[j] >> LINE_SHIFT, tick)
            lat = -(-(done - start) // period) - c
            res.loads += 1
            res.load_latency_cycles += lat
            src_count[src] = src_count.get(src, 0) + 1
            # blocking: the core waits for the data
            res.stall_cycles += lat - 1
            c += lat
        elif k == U_STORE:
            src = mem.store(which, addrs[j] >> LINE_SHIFT, tick)
            src_count[src] = src_count.get(src, 0) + 1
            c += 1
        else:
            if not mem.issue_prefetch(which, addrs[j], tick):
                res.prefetches_dropped += 1
            npref += 1
            if on_prefetch is not None:
                on_prefetch(npref, tick)
            c += 1
    res.cycles = c
    res.retired = sum(ops)
    return res


def _run_ooo(core, mem, prog, start, on_prefetch, clock):
    """Greedy list schedule with an op-counted window and in-order retire.

    An entry enters the window once all its ops fit (or the window is
    empty). Ready entries issue oldest first, ``width`` ops per cycle; a
    multi-op entry may spread over several cycles and completes one cycle
    after its last op. A load that misses needs a free MLP slot; loads that
    merge with an in-flight line do not. Entries leave the window in
    program order once complete.
    """
    kinds, ops, addrs, deps = prog.kinds, prog.ops, prog.addrs, prog.deps
    n = len(kinds)
    res = SliceResult(sources={})
    res.retired = sum(ops)
    if n == 0:
        return res
    which, period = core.which, core.period
    width, window, mlp = core.width, core.window, core.mlp
    heappush, heappop = heapq.heappush, heapq.heappop
    src_count = res.sources
    try_load, store, prefetch = mem.try_load, mem.store, mem.issue_prefetch

    comp = [-1] * n
    rem = list(ops)
    remaining = [len(d) for d in deps]
    consumers: list[list[int]] = [[] for _ in range(n)]
    for j, ds in enumerate(deps):
        for d in ds:
            consumers[j - d].append(j)
    pending: list[tuple[int, int]] = []
    ready: list[int] = []
    outstanding: list[int] = []
    head = 0
    win_end = 0
    win_ops = 0
    c = 0
    busy = 0
    npref = 0
    loads = lat_sum = 0
    while True:
        while head < n and 0 <= comp[head] <= c:
            win_ops -= ops[head]
            head += 1
        if head == n:
            break
        while win_end < n and (win_ops == 0 or win_ops + ops[win_end] <= window):
            j = win_end
            win_ops += ops[j]
            if remaining[j] == 0:
                t = 0
                for d in deps[j]:
                    if comp[j - d] > t:
                        t = comp[j - d]
                heappush(pending, (t, j))
            win_end += 1
        while pending and pending[0][0] <= c:
            heappush(ready, heappop(pending)[1])
        while outstanding and outstanding[0] <= c:
            heappop(outstanding)

        slots = width
        blocked = None
        synced = False
        tick = start + c * period
        while ready and slots:
            j = ready[0]
            k = kinds[j]
            if k == U_ALU:
                r = rem[j]
                if r > slots:
                    rem[j] = r - slots
                    slots = 0
                    break
                rem[j] = 0
                slots -= r
                heappop(ready)
                comp[j] = c + 1
            else:
                heappop(ready)
                if not synced:
                    if clock.solo:
                        mem.advance(tick)
                    else:
                        yield tick
                    synced = True
                if k == U_LOAD:
                    got = try_load(which, addrs[j] >> LINE_SHIFT, tick, len(outstanding) < mlp)
                    if got is None:
                        if blocked is None:
                            blocked = [j]
                        else:
                            blocked.append(j)
                        continue
                    src, done, missed = got
                    cdone = -(-(done - start) // period)
                    comp[j] = cdone
                    if missed:
                        heappush(outstanding, cdone)
                    loads += 1
                    lat_sum += cdone - c
                    src_count[src] = src_count.get(src, 0) + 1
                elif k == U_STORE:
                    src = store(which, addrs[j] >> LINE_SHIFT, tick)
                    src_count[src] = src_count.get(src, 0) + 1
                    comp[j] = c + 1
                else:
                    if not prefetch(which, addrs[j], tick):
                        res.prefetches_dropped += 1
                    npref += 1
                    if on_prefetch is not None:
                        on_prefetch(npref, tick)
                    comp[j] = c + 1
                slots -= 1
            for q in consumers[j]:
                remaining[q] -= 1
                if remaining[q] == 0 and q < win_end:
                    t = 0
                    for d in deps[q]:
                        if comp[q - d] > t:
                            t = comp[q - d]
                    heappush(pending, (t, q))
        nblocked = 0
        if blocked is not None:
            nblocked = len(blocked)
            for j in blocked:
                heappush(ready, j)
        if slots < width:
            busy += 1
        if slots == 0 and len(ready) > nblocked:
            if len(ready) == 1 and not nblocked and kinds[ready[0]] == U_ALU:
                # a lone multi-op entry: skip whole cycles until something else can happen
                j = ready[0]
                e = pending[0][0] if pending else None
                if comp[head] > c and win_end < n and (e is None or comp[head] < e):
                    e = comp[head]
                t = (rem[j] - 1) // width
                if e is not None:
                    t = min(t, e - c - 1)
                if t > 0:
                    rem[j] -= t * width
                    busy += t
                    c += t
            c += 1
            continue
        # nothing else can issue this cycle: jump to the next event
        nxt = 1 << 60
        if pending and pending[0][0] > c:
            nxt = pending[0][0]
        if comp[head] > c and comp[head] < nxt:
            nxt = comp[head]
        if nblocked:
            if outstanding and c < outstanding[0] < nxt:
                nxt = outstanding[0]
            f = mem.next_fill(which, start + c * period)
            if f is not None:
                f = -(-(f - start) // period)
                if c < f < nxt:
                    nxt = f
        c = nxt if nxt < 1 << 60 else c + 1
    res.cycles = max(comp)
    res.stall_cycles = res.cycles - busy
    res.loads = loads
    res.load_latency_cycles = lat_sum
    return res
