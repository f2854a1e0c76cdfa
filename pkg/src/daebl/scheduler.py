"""Access-on-LITTLE / Execute-on-big orchestration.

A run is described as one *action program* per core (thread management,
lock waits and operations, sleeps, slice bodies, loop control). The program
is built once per run, including any jitter drawn from the seeded RNG, and
can then be executed by the event-driven :class:`Engine` here or by the
cycle-stepping reference in :mod:`daebl.oracle`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from daebl.kernel_ir import ValidatedKernel
from daebl.machine import (
    BIG, LITTLE, Clock, ConfigError, CoreTiming, MachineConfig, MemorySystem, Program, SliceResult,
    build_program, loop_control_program, run_slice,
)
from daebl.transform import ChunkedKernel, PhasePair, chunk

ACCESS_SLICE = "AccessSlice"
EXECUTE_SLICE = "ExecuteSlice"
LOOP_CTL = "LoopCtl"
LOCK_WAIT = "LockWait"
LOCK_OP = "LockOp"
SLEEP = "Sleep"
SPAWN = "Spawn"
JOIN = "Join"
SIGNAL = "Signal"
IDLE = "Idle"

CORE_NAMES = {BIG: "big", LITTLE: "LITTLE"}


@dataclass(frozen=True)
class Coupled:
    """Unmodified loop on the big core alone (the baseline)."""


@dataclass(frozen=True)
class LockStep:
    # fraction of an Access slice's prefetches issued before Execute may start
    lead_fraction: float = 1.0


@dataclass(frozen=True)
class Timed:
    sleep_access_ns: float | tuple[float, ...] = 0.0
    sleep_execute_ns: float | tuple[float, ...] = 0.0
    jitter_stddev_ns: float = 0.0
    rng_seed: int = 0


@dataclass(frozen=True)
class Hybrid:
    inner: Timed
    resync_period_slices: int = 4
    lead_fraction: float = 1.0


SyncPolicy = Union[Coupled, LockStep, Timed, Hybrid]


@dataclass(frozen=True)
class SpawnPerInvocation:
    spawn_join_cost_ns: float | None = None


@dataclass(frozen=True)
class Pool:
    signal_cost_ns: float | None = None


ThreadModel = Union[SpawnPerInvocation, Pool]


def policy_name(sync: SyncPolicy) -> str:
    if isinstance(sync, LockStep) and sync.lead_fraction < 1:
        return f"LockStep(lead={sync.lead_fraction:g})"
    if isinstance(sync, Hybrid):
        return f"Hybrid(P={sync.resync_period_slices})"
    return type(sync).__name__


def validate_policy(sync: SyncPolicy) -> None:
    if isinstance(sync, Timed):
        if sync.jitter_stddev_ns < 0:
            raise ConfigError("jitter stddev must be >= 0")
    elif isinstance(sync, Hybrid):
        validate_policy(sync.inner)
        if sync.resync_period_slices < 1:
            raise ConfigError("resync period must be >= 1 slice")
    if isinstance(sync, (LockStep, Hybrid)) and not 0 <= sync.lead_fraction <= 1:
        raise ConfigError("lead fraction must lie in [0, 1]")


def set_overlap(sync: SyncPolicy, lead_fraction: float) -> SyncPolicy:
    """Let Execute start once ``lead_fraction`` of a slice's prefetches are issued."""
    if not isinstance(sync, (LockStep, Hybrid)):
        raise ConfigError("overlap applies to LockStep or Hybrid policies only")
    out = replace(sync, lead_fraction=lead_fraction)
    validate_policy(out)
    return out


@dataclass
class Interval:
    core: int
    tag: str
    start: int
    end: int
    invocation: int = -1
    slice: int = -1
    result: SliceResult | None = None


@dataclass
class Timeline:
    tick_mhz: int
    intervals: list[Interval] = field(default_factory=list)
    slice_count: int = 0
    invocations: int = 1
    dropped_prefetches: tuple[int, int] = (0, 0)

    def ns(self, ticks: int) -> float:
        return ticks * 1000 / self.tick_mhz

    def core(self, which: int) -> list[Interval]:
        return [iv for iv in self.intervals if iv.core == which]

    def end(self, which: int | None = None) -> int:
        ivs = self.intervals if which is None else self.core(which)
        return max((iv.end for iv in ivs), default=0)

    def slices(self, tag: str) -> list[Interval]:
        return [iv for iv in self.intervals if iv.tag == tag]

    def events(self) -> list[dict]:
        """Structured event log, one record per interval."""
        return [
            {"core": CORE_NAMES[iv.core], "tag": iv.tag,
             "start_ns": round(self.ns(iv.start), 6), "end_ns": round(self.ns(iv.end), 6),
             "invocation": iv.invocation, "slice": iv.slice}
            for iv in sorted(self.intervals, key=lambda iv: (iv.start, iv.core, iv.end))
        ]


# ---------------------------------------------------------------- programs

@dataclass
class Programs:
    big: list[tuple]
    little: list[tuple]
    slice_count: int
    invocations: int


def _sleeps(value: float | Sequence[float], inv: int, s: int, nslices: int) -> float:
    """Scalar, one value per slice, or one per (invocation, slice) pair."""
    if isinstance(value, (int, float)):
        return float(value)
    if len(value) == nslices:
        return float(value[s])
    return float(value[inv * nslices + s])


def _phase_programs(kernel: ValidatedKernel, body, ck: ChunkedKernel, m: MachineConfig) -> list[Program]:
    return [build_program(kernel, body, r, m.inner_loop_ops) for r in ck.slices()]


def coupled_programs(kernel: ValidatedKernel, m: MachineConfig, granularity: int | None = None) -> Programs:
    ck = chunk(kernel, granularity or kernel.iterations)
    progs = _phase_programs(kernel, kernel.body, ck, m)
    ctl = loop_control_program(m.outer_loop_ops)
    big = []
    for inv in range(kernel.spec.invocations):
        for s, p in enumerate(progs):
            big.append(("run", EXECUTE_SLICE, inv, s, p, None))
            big.append(("run", LOOP_CTL, inv, s, ctl, None))
    return Programs(big, [], ck.slice_count, kernel.spec.invocations)


def dae_programs(pair: PhasePair, m: MachineConfig, sync: SyncPolicy, threads: ThreadModel) -> Programs:
    if isinstance(sync, Coupled):
        raise ConfigError("run_dae needs a decoupled policy; use run_coupled for the baseline")
    validate_policy(sync)
    kernel, ck = pair.kernel, pair.chunked
    acc_progs = _phase_programs(kernel, pair.access, ck, m)
    exe_progs = _phase_programs(kernel, pair.execute, ck, m)
    ctl = loop_control_program(m.outer_loop_ops)
    nslices = ck.slice_count
    lock = m.ns_to_ticks(m.lock_cost_ns)

    timed = sync.inner if isinstance(sync, Hybrid) else sync if isinstance(sync, Timed) else None
    rng = np.random.default_rng(timed.rng_seed) if timed is not None else None
    period = sync.resync_period_slices if isinstance(sync, Hybrid) else 1
    lead = getattr(sync, "lead_fraction", 1.0)
    if timed is not None:
        for v in (timed.sleep_access_ns, timed.sleep_execute_ns):
            if not isinstance(v, (int, float)) and len(v) not in (nslices, nslices * kernel.spec.invocations):
                raise ConfigError(f"need {nslices} or {nslices * kernel.spec.invocations} sleep values, got {len(v)}")

    def locked(s: int) -> bool:
        if isinstance(sync, LockStep):
            return True
        if isinstance(sync, Hybrid):
            return s % period == 0
        return False

    def sleep_ticks(value, inv: int, s: int) -> int:
        ns = _sleeps(value, inv, s, nslices)
        if timed.jitter_stddev_ns > 0:
            ns += float(rng.normal(0.0, timed.jitter_stddev_ns))
        return m.ns_to_ticks(max(0.0, ns))

    if isinstance(threads, Pool):
        start_cost = m.signal_cost_ns if threads.signal_cost_ns is None else threads.signal_cost_ns
        start_tag, end_cost = SIGNAL, 0.0
    else:
        total = m.spawn_join_cost_ns if threads.spawn_join_cost_ns is None else threads.spawn_join_cost_ns
        if total < 0:
            raise ConfigError("thread costs must be >= 0")
        start_tag, start_cost, end_cost = SPAWN, total / 2, total / 2
    start_ticks = m.ns_to_ticks(start_cost)
    end_ticks = m.ns_to_ticks(end_cost)

    acc: list[tuple] = []
    exe: list[tuple] = []
    for inv in range(kernel.spec.invocations):
        for prog in (acc, exe):
            prog.append(("thread", start_tag, start_ticks))
        acc.append(("release", ("A", inv, 0)))
        for s in range(nslices):
            # sleeps are drawn in a fixed order so both simulators see one stream
            sa = sleep_ticks(timed.sleep_access_ns, inv, s) if timed is not None and not locked(s) else 0
            se = sleep_ticks(timed.sleep_execute_ns, inv, s) if timed is not None and not locked(s) else 0
            if locked(s):
                acc += [("wait", ("A", inv, s), LOCK_WAIT), ("lockop", lock)]
            elif s > 0:
                acc.append(("sleep", sa))
            hook = None
            if locked(s) and lead < 1:
                k = math.ceil(lead * acc_progs[s].prefetches)
                hook = (k, ("E", inv, s))
            acc.append(("run", ACCESS_SLICE, inv, s, acc_progs[s], hook))
            acc.append(("run", LOOP_CTL, inv, s, ctl, None))
            if hook is None:
                acc.append(("release", ("E", inv, s)))

            if locked(s):
                exe += [("wait", ("E", inv, s), LOCK_WAIT), ("lockop", lock)]
            else:
                exe.append(("sleep", se))
            exe.append(("run", EXECUTE_SLICE, inv, s, exe_progs[s], None))
            exe.append(("run", LOOP_CTL, inv, s, ctl, None))
            exe.append(("release", ("A", inv, s + 1)))
        acc += [("release", ("Adone", inv)), ("wait", ("Edone", inv), IDLE)]
        exe += [("release", ("Edone", inv)), ("wait", ("Adone", inv), IDLE)]
        if end_ticks:
            acc.append(("thread", JOIN, end_ticks))
            exe.append(("thread", JOIN, end_ticks))
    return Programs(exe, acc, nslices, kernel.spec.invocations)


# ---------------------------------------------------------------- engine

class Engine:
    """Discrete-event executor for a pair of core programs.

    Each core is a generator; the engine resumes them in (tick, core) order
    and applies due cache fills before every resumption, so shared cache
    state is always observed in global time order.
    """

    def __init__(self, machine: MachineConfig):
        self.m = machine
        self.mem = MemorySystem(machine)
        self.timeline = Timeline(machine.tick_mhz)
        self._heap: list = []
        self._seq = 0
        self._released: dict = {}
        self._parked: dict = {}
        self.clock = Clock()

    def _push(self, tick: int, which: int, gen, value=None) -> None:
        self.clock.solo = False
        self._seq += 1
        heapq.heappush(self._heap, (tick, which, self._seq, gen, value))

    def release(self, key, tick: int) -> None:
        if key in self._released:
            return
        self._released[key] = tick
        parked = self._parked.pop(key, None)
        if parked is not None:
            gen, which, pnow = parked
            self._push(max(tick, pnow), which, gen, tick)

    def _process(self, which: int, actions: list[tuple]):
        core = CoreTiming.of(self.m, which)
        record = self.timeline.intervals.append
        now = 0
        for act in actions:
            op = act[0]
            if op == "run":
                _, tag, inv, s, prog, hook = act
                cb = None
                if hook is not None:
                    k, key = hook
                    if k == 0:
                        self.release(key, now)
                    else:
                        cb = (lambda n, t, k=k, key=key: self.release(key, t) if n == k else None)
                res = yield from run_slice(core, self.mem, prog, now, cb, self.clock)
                end = now + res.cycles * core.period
                record(Interval(which, tag, now, end, inv, s, res))
                now = end
            elif op == "wait":
                key, tag = act[1], act[2]
                t = self._released.get(key)
                if t is None:
                    t = yield ("wait", key, now)
                if t > now:
                    record(Interval(which, tag, now, t))
                    now = t
            elif op == "release":
                self.release(act[1], now)
            elif op == "thread":
                if act[2]:
                    record(Interval(which, act[1], now, now + act[2]))
                    now += act[2]
            elif op == "sleep":
                if act[1]:
                    record(Interval(which, SLEEP, now, now + act[1]))
                    now += act[1]
            elif op == "lockop":
                if act[1]:
                    record(Interval(which, LOCK_OP, now, now + act[1]))
                    now += act[1]
            else:
                raise ValueError(f"unknown action {op!r}")

    def run(self, programs: Programs) -> Timeline:
        for which, actions in ((BIG, programs.big), (LITTLE, programs.little)):
            if actions:
                self._push(0, which, self._process(which, actions))
        heap, mem = self._heap, self.mem
        while heap:
            tick, which, _, gen, value = heapq.heappop(heap)
            mem.advance(tick)
            # alone until the other core is scheduled again by a release
            self.clock.solo = not heap
            try:
                y = gen.send(value)
            except StopIteration:
                continue
            if type(y) is int:
                self._seq += 1
                heapq.heappush(heap, (y, which, self._seq, gen, None))
            else:
                _, key, pnow = y
                t = self._released.get(key)
                if t is not None:
                    self._push(max(t, pnow), which, gen, t)
                else:
                    self._parked[key] = (gen, which, pnow)
        if self._parked:
            raise RuntimeError(f"deadlock: cores still waiting on {list(self._parked)}")
        tl = self.timeline
        tl.slice_count = programs.slice_count
        tl.invocations = programs.invocations
        tl.dropped_prefetches = tuple(mem.dropped)
        tl.intervals.sort(key=lambda iv: (iv.core, iv.start, iv.end))
        _fill_idle(tl)
        return tl


def _fill_idle(tl: Timeline) -> None:
    """Pad each core with Idle so its intervals are contiguous up to the run end."""
    end = tl.end()
    out = []
    for which in (BIG, LITTLE):
        ivs = tl.core(which)
        if not ivs:
            continue
        t = 0
        for iv in ivs:
            if iv.start > t:
                out.append(Interval(which, IDLE, t, iv.start))
            out.append(iv)
            t = iv.end
        if t < end:
            out.append(Interval(which, IDLE, t, end))
    tl.intervals = out


def check_timeline(tl: Timeline, lockstep: bool = False) -> None:
    """Assert structural invariants (contiguity, slice coverage, LockStep safety)."""
    for which in (BIG, LITTLE):
        t = 0
        for iv in tl.core(which):
            assert iv.start == t and iv.end >= iv.start, f"gap or overlap on core {which} at {iv}"
            t = iv.end
    for tag in (ACCESS_SLICE, EXECUTE_SLICE):
        ivs = tl.slices(tag)
        if not ivs:
            continue
        seen = sorted((iv.invocation, iv.slice) for iv in ivs)
        want = [(inv, s) for inv in range(tl.invocations) for s in range(tl.slice_count)]
        assert seen == want, f"{tag} slices do not cover each index exactly once"
    if lockstep:
        acc = {(iv.invocation, iv.slice): iv for iv in tl.slices(ACCESS_SLICE)}
        exe = {(iv.invocation, iv.slice): iv for iv in tl.slices(EXECUTE_SLICE)}
        for (inv, s), e in exe.items():
            assert e.start >= acc[inv, s].end, f"Execute slice {s} started before Access finished"
            nxt = acc.get((inv, s + 1))
            if nxt is not None:
                assert nxt.start >= e.end, f"Access slice {s + 1} started before Execute finished"


def simulate(programs: Programs, machine: MachineConfig) -> Timeline:
    return Engine(machine).run(programs)
