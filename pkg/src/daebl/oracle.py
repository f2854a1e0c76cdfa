"""Brute-force reference simulator.

Interprets the same per-core action programs as :class:`daebl.scheduler.Engine`
but shares none of its machinery: caches are plain lists in LRU order, the
out-of-order core advances one clock cycle per step and rescans its whole
window every cycle, and the in-order core steps from one entry to the next. Within one tick, due fills land first,
then the big core steps, then the LITTLE core, then any core woken at that
same tick. It is slow by design and refuses kernels longer than
``MAX_ITERATIONS``.
"""

from __future__ import annotations

from daebl.kernel_ir import ValidatedKernel
from daebl.machine import (
    BIG, INORDER, INFLIGHT, L1, LINE_SHIFT, LITTLE, LOCAL_L2, MEMORY, REMOTE,
    U_ALU, U_LOAD, U_STORE, MachineConfig, SliceResult,
)
from daebl.scheduler import (
    IDLE, LOCK_OP, SLEEP, Interval, Programs, SyncPolicy, ThreadModel, Timeline,
    Coupled, SpawnPerInvocation, coupled_programs, dae_programs,
)
from daebl.transform import chunk, make_phase_pair

MAX_ITERATIONS = 4096


class OracleTooLarge(ValueError):
    pass


class _ListCache:
    def __init__(self, size: int, assoc: int, line: int):
        self.nsets = size // (line * assoc)
        self.assoc = assoc
        self.sets = [[] for _ in range(self.nsets)]

    def has(self, ln: int) -> bool:
        return ln in self.sets[ln % self.nsets]

    def use(self, ln: int) -> bool:
        s = self.sets[ln % self.nsets]
        if ln in s:
            s.remove(ln)
            s.append(ln)
            return True
        return False

    def put(self, ln: int) -> None:
        s = self.sets[ln % self.nsets]
        if ln in s:
            s.remove(ln)
        elif len(s) == self.assoc:
            s.pop(0)
        s.append(ln)


class _Memory:
    def __init__(self, m: MachineConfig):
        self.l1 = []
        self.l2 = []
        self.lat = []
        self.period = []
        self.depth = []
        for which in (BIG, LITTLE):
            c = m.cluster(which)
            self.l1.append(_ListCache(c.l1d.size, c.l1d.assoc, c.l1d.line))
            self.l2.append(_ListCache(c.l2.size, c.l2.assoc, c.l2.line))
            self.lat.append(m.latencies(which))
            self.period.append(m.period(which))
            self.depth.append(c.prefetch_queue_depth)
        self.pending = [{}, {}]  # line -> (arrival, is_prefetch)
        self.fills = []  # (arrival, order, which, line), kept sorted
        self.order = 0
        self.in_flight_pf = [0, 0]
        self.dropped = [0, 0]

    def land(self, tick: int) -> None:
        while self.fills and self.fills[0][0] <= tick:
            _, _, w, ln = self.fills.pop(0)
            _, pf = self.pending[w].pop(ln)
            if pf:
                self.in_flight_pf[w] -= 1
            self.l2[w].put(ln)
            self.l1[w].put(ln)

    def _start_fill(self, w: int, ln: int, arrival: int, pf: bool) -> None:
        self.pending[w][ln] = (arrival, pf)
        self.order += 1
        item = (arrival, self.order, w, ln)
        k = len(self.fills)
        while k > 0 and self.fills[k - 1][:2] > item[:2]:
            k -= 1
        self.fills.insert(k, item)

    def _source(self, w: int, ln: int) -> str:
        if self.l2[w].use(ln):
            return LOCAL_L2
        if self.l2[1 - w].has(ln):
            return REMOTE
        return MEMORY

    def state(self, w: int, ln: int) -> str:
        if self.l1[w].has(ln):
            return "hit"
        if ln in self.pending[w]:
            return "pending"
        return "miss"

    def load(self, w: int, ln: int, tick: int):
        per = self.period[w]
        if self.l1[w].use(ln):
            return L1, tick + self.lat[w][L1] * per
        if ln in self.pending[w]:
            return INFLIGHT, max(tick + self.lat[w][L1] * per, self.pending[w][ln][0])
        src = self._source(w, ln)
        done = tick + self.lat[w][src] * per
        self._start_fill(w, ln, done, False)
        return src, done

    def store(self, w: int, ln: int) -> str:
        if self.l1[w].use(ln):
            return L1
        if ln in self.pending[w]:
            return INFLIGHT
        src = self._source(w, ln)
        self.l2[w].put(ln)
        self.l1[w].put(ln)
        return src

    def prefetch(self, w: int, ln: int, tick: int) -> bool:
        if self.l1[w].has(ln) or ln in self.pending[w] or self.l2[w].has(ln):
            return True
        if self.in_flight_pf[w] >= self.depth[w]:
            self.dropped[w] += 1
            return False
        src = REMOTE if self.l2[1 - w].has(ln) else MEMORY
        self._start_fill(w, ln, tick + self.lat[w][src] * self.period[w], True)
        self.in_flight_pf[w] += 1
        return True


class _Slice:
    """One program being executed cycle by cycle."""

    def __init__(self, core: "_Core", prog, start: int, hook):
        self.core = core
        self.prog = prog
        self.start = start
        self.hook = hook
        self.res = SliceResult(sources={})
        self.res.retired = sum(prog.ops)
        self.npref = 0
        n = len(prog.kinds)
        self.n = n
        self.deps = [tuple(j - d for d in prog.deps[j]) for j in range(n)]
        self.left = list(prog.ops)
        self.done = [None] * n
        self.misses = []  # completion cycles of started misses
        self.head = 0
        self.win_end = 0
        self.win_ops = 0
        self.next_j = 0
        self.busy_until = 0
        self.finished = n == 0
        self.busy_cycles = 0

    def _count(self, src: str) -> None:
        s = self.res.sources
        s[src] = s.get(src, 0) + 1

    def _memop(self, j: int, c: int, tick: int) -> int | None:
        """Perform memory entry j at cycle c; returns its completion cycle or None if blocked."""
        core, mem, prog = self.core, self.core.mem, self.prog
        w, per = core.which, core.period
        kind = prog.kinds[j]
        ln = prog.addrs[j] >> LINE_SHIFT
        if kind == U_LOAD:
            if not core.inorder:
                live = sum(1 for x in self.misses if x > c)
                if mem.state(w, ln) == "miss" and live >= core.mlp:
                    return None
            was_miss = mem.state(w, ln) == "miss"
            src, done = mem.load(w, ln, tick)
            cdone = -(-(done - self.start) // per)
            if was_miss:
                self.misses.append(cdone)
            self._count(src)
            self.res.loads += 1
            self.res.load_latency_cycles += cdone - c
            return cdone
        if kind == U_STORE:
            self._count(mem.store(w, ln))
            return c + 1
        if not mem.prefetch(w, ln, tick):
            self.res.prefetches_dropped += 1
        self.npref += 1
        if self.hook is not None and self.npref == self.hook[0]:
            core.sim.release(self.hook[1], tick)
        return c + 1

    def step(self, c: int) -> None:
        if self.core.inorder:
            self._step_inorder(c)
        else:
            self._step_ooo(c)

    def _step_inorder(self, c: int) -> None:
        prog = self.prog
        if c < self.busy_until:
            return
        if self.next_j == self.n:
            self.finished = True
            self.res.cycles = self.busy_until
            return
        j = self.next_j
        self.next_j += 1
        if prog.kinds[j] == U_ALU:
            self.busy_until = c + prog.ops[j]
            return
        tick = self.start + c * self.core.period
        cdone = self._memop(j, c, tick)
        if prog.kinds[j] == U_LOAD:
            self.res.stall_cycles += cdone - c - 1
        self.busy_until = cdone
        if self.next_j == self.n and self.busy_until <= c:
            self.finished = True

    def _step_ooo(self, c: int) -> None:
        prog, core = self.prog, self.core
        ops, done = prog.ops, self.done
        while self.head < self.n and done[self.head] is not None and done[self.head] <= c:
            self.win_ops -= ops[self.head]
            self.head += 1
        if self.head == self.n:
            self.finished = True
            self.res.cycles = max(done)
            self.res.stall_cycles = self.res.cycles - self.busy_cycles
            return
        while self.win_end < self.n and (
                self.win_ops == 0 or self.win_ops + ops[self.win_end] <= core.window):
            self.win_ops += ops[self.win_end]
            self.win_end += 1
        slots = core.width
        tick = self.start + c * core.period
        for j in range(self.head, self.win_end):
            if slots == 0:
                break
            if done[j] is not None:
                continue
            if any(done[d] is None or done[d] > c for d in self.deps[j]):
                continue
            if prog.kinds[j] == U_ALU:
                take = min(self.left[j], slots)
                self.left[j] -= take
                slots -= take
                if self.left[j] == 0:
                    done[j] = c + 1
                continue
            cdone = self._memop(j, c, tick)
            if cdone is None:
                continue
            done[j] = cdone
            slots -= 1
        if slots < core.width:
            self.busy_cycles += 1


class _Core:
    def __init__(self, sim: "OracleSim", which: int, actions: list[tuple]):
        m = sim.m
        cfg = m.cluster(which).core
        self.sim = sim
        self.mem = sim.mem
        self.which = which
        self.period = m.period(which)
        self.inorder = cfg.kind == INORDER
        self.width, self.window, self.mlp = cfg.issue_width, cfg.window, cfg.mlp_degree
        self.actions = actions
        self.ai = 0
        self.now = 0
        self.slice: _Slice | None = None
        self.slice_meta = None
        self.cycle = 0
        self.waiting = None
        self.next_tick: int | None = 0 if actions else None

    def record(self, tag, start, end, inv=-1, s=-1, res=None) -> None:
        self.sim.intervals.append(Interval(self.which, tag, start, end, inv, s, res))

    def step(self, t: int) -> None:
        if self.slice is not None:
            sl = self.slice
            sl.step(self.cycle)
            if sl.finished:
                tag, inv, s = self.slice_meta
                end = sl.start + sl.res.cycles * self.period
                self.record(tag, sl.start, end, inv, s, sl.res)
                self.slice = None
                self.now = end
                self.next_tick = end
            else:
                self.cycle += 1
                if self.inorder:
                    # an in-order core does nothing until its current entry completes
                    self.cycle = max(self.cycle, sl.busy_until)
                self.next_tick = sl.start + self.cycle * self.period
            return
        self.now = t
        self._advance_actions()

    def _advance_actions(self) -> None:
        while self.ai < len(self.actions):
            act = self.actions[self.ai]
            op = act[0]
            if op == "run":
                _, tag, inv, s, prog, hook = act
                self.ai += 1
                if hook is not None and hook[0] == 0:
                    self.sim.release(hook[1], self.now)
                    hook = None
                self.slice = _Slice(self, prog, self.now, hook)
                self.slice_meta = (tag, inv, s)
                self.cycle = 0
                self.next_tick = self.now
                return
            if op == "wait":
                t = self.sim.released.get(act[1])
                if t is None:
                    self.waiting = act[1]
                    self.next_tick = None
                    return
                self.ai += 1
                if t > self.now:
                    self.record(act[2], self.now, t)
                    self.now = t
                    self.next_tick = t
                    return
                continue
            self.ai += 1
            if op == "release":
                self.sim.release(act[1], self.now)
                continue
            ticks = act[2] if op == "thread" else act[1]
            if ticks:
                tag = {"thread": None, "sleep": SLEEP, "lockop": LOCK_OP}[op] or act[1]
                self.record(tag, self.now, self.now + ticks)
                self.now += ticks
                self.next_tick = self.now
                return
        self.next_tick = None


class OracleSim:
    def __init__(self, machine: MachineConfig):
        self.m = machine
        self.mem = _Memory(machine)
        self.released: dict = {}
        self.intervals: list[Interval] = []
        self.cores: list[_Core] = []

    def release(self, key, tick: int) -> None:
        if key in self.released:
            return
        self.released[key] = tick
        for core in self.cores:
            if core.waiting == key:
                core.waiting = None
                core.next_tick = max(tick, core.now)

    def run(self, programs: Programs) -> Timeline:
        self.cores = [_Core(self, BIG, programs.big), _Core(self, LITTLE, programs.little)]
        while True:
            ticks = [c.next_tick for c in self.cores if c.next_tick is not None]
            if not ticks:
                break
            t = min(ticks)
            self.mem.land(t)
            stepped = set()
            progress = True
            while progress:
                progress = False
                for core in self.cores:
                    if core.next_tick == t and core.which not in stepped:
                        stepped.add(core.which)
                        core.step(t)
                        progress = True
            # a core whose next step is still at t (zero-length action) runs again
        stuck = [c.waiting for c in self.cores if c.waiting is not None]
        if stuck:
            raise RuntimeError(f"deadlock: cores still waiting on {stuck}")
        tl = Timeline(self.m.tick_mhz, slice_count=programs.slice_count,
                      invocations=programs.invocations)
        tl.dropped_prefetches = tuple(self.mem.dropped)
        ivs = sorted(self.intervals, key=lambda iv: (iv.core, iv.start, iv.end))
        end = max((iv.end for iv in ivs), default=0)
        out = []
        for which in (BIG, LITTLE):
            mine = [iv for iv in ivs if iv.core == which]
            if not mine and not (programs.big if which == BIG else programs.little):
                continue
            t = 0
            for iv in mine:
                if iv.start > t:
                    out.append(Interval(which, IDLE, t, iv.start))
                out.append(iv)
                t = iv.end
            if t < end:
                out.append(Interval(which, IDLE, t, end))
        tl.intervals = out
        return tl


def run_oracle(kernel: ValidatedKernel, machine: MachineConfig, sync: SyncPolicy, granularity: int,
               threads: ThreadModel = SpawnPerInvocation()) -> Timeline:
    """Reference timeline for one run (``Coupled`` gives the baseline)."""
    if kernel.iterations > MAX_ITERATIONS:
        raise OracleTooLarge(f"oracle limited to N <= {MAX_ITERATIONS}, got {kernel.iterations}")
    if isinstance(sync, Coupled):
        programs = coupled_programs(kernel, machine, granularity)
    else:
        programs = dae_programs(make_phase_pair(chunk(kernel, granularity)), machine, sync, threads)
    return OracleSim(machine).run(programs)


def slice_table(tl: Timeline) -> list[tuple]:
    """Comparable per-slice rows: (core, tag, invocation, slice, start, end, cycles, retired)."""
    return [(iv.core, iv.tag, iv.invocation, iv.slice, iv.start, iv.end, iv.result.cycles,
             iv.result.retired)
            for iv in sorted(tl.intervals, key=lambda iv: (iv.core, iv.start, iv.end))
            if iv.result is not None]


def diff_timelines(a: Timeline, b: Timeline) -> list[str]:
    """Human-readable differences in per-slice timing; empty when equivalent."""
    ra, rb = slice_table(a), slice_table(b)
    out = []
    if len(ra) != len(rb):
        out.append(f"slice count differs: {len(ra)} vs {len(rb)}")
    for x, y in zip(ra, rb):
        if x != y:
            out.append(f"{x} != {y}")
            if len(out) > 10:
                break
    return out
