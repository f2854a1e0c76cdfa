"""Region counters, IPC, runtime breakdown and a parametric energy model."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields

from daebl.machine import BIG, LITTLE, MachineConfig
from daebl.scheduler import (
    ACCESS_SLICE, EXECUTE_SLICE, JOIN, LOCK_OP, LOOP_CTL, SIGNAL, SPAWN, Timeline,
)

INNER_LOOP = "InnerLoop"
PHASE = "Phase"
WHOLE = "Whole"

THREAD_TAGS = (SPAWN, JOIN, SIGNAL)
ACTIVE_TAGS = (ACCESS_SLICE, EXECUTE_SLICE, LOOP_CTL, LOCK_OP) + THREAD_TAGS


class UnknownRegion(LookupError):
    pass


@dataclass(frozen=True)
class Region:
    kind: str = INNER_LOOP
    phase: str = "execute"
    slice: int | None = None
    invocation: int | None = None


@dataclass(frozen=True)
class RegionCounters:
    cycles: int
    retired_instructions: int
    region: Region = Region()

    @property
    def ipc(self) -> float:
        if self.cycles == 0:
            raise ZeroDivisionError("region has zero cycles")
        return self.retired_instructions / self.cycles


@dataclass(frozen=True)
class CounterConfig:
    cycle_divider: int = 64
    counter_width_bits: int = 32

    def __post_init__(self):
        if self.cycle_divider < 1:
            raise ValueError("cycle divider must be >= 1")


def quantize_counter(cycles: int, cfg: CounterConfig = CounterConfig()) -> int:
    """Value of a divided, fixed-width cycle counter after ``cycles`` cycles."""
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    return (cycles // cfg.cycle_divider) % (1 << cfg.counter_width_bits)


def dequantize_counter(value: int, cfg: CounterConfig = CounterConfig(), wraps: int = 0) -> int:
    return (value + (wraps << cfg.counter_width_bits)) * cfg.cycle_divider


def counter_delta(start_value: int, end_value: int, cfg: CounterConfig = CounterConfig()) -> int:
    """Cycles between two counter reads, tolerating one wraparound."""
    return ((end_value - start_value) % (1 << cfg.counter_width_bits)) * cfg.cycle_divider


_PHASE_CORE = {"execute": BIG, "access": LITTLE}
_PHASE_TAG = {"execute": EXECUTE_SLICE, "access": ACCESS_SLICE}


def measure_region(tl: Timeline, region: Region, machine: MachineConfig,
                   counter: CounterConfig | None = None) -> RegionCounters:
    """Sum cycles and retired instructions over the intervals of ``region``.

    InnerLoop covers slice bodies only, Phase adds the outer loop control,
    Whole is every instruction the core ran over its whole lifetime. With
    ``counter`` set, each interval is measured by reading an emulated divided
    counter at its start and end instead of exact cycles.
    """
    if region.phase not in _PHASE_CORE:
        raise UnknownRegion(f"unknown phase {region.phase!r}")
    which = _PHASE_CORE[region.phase]
    period = machine.period(which)
    if region.kind == INNER_LOOP:
        tags = (_PHASE_TAG[region.phase],)
    elif region.kind == PHASE:
        tags = (_PHASE_TAG[region.phase], LOOP_CTL)
    elif region.kind == WHOLE:
        tags = None
    else:
        raise UnknownRegion(f"unknown region kind {region.kind!r}")

    ivs = []
    for iv in tl.core(which):
        if tags is not None and iv.tag not in tags:
            continue
        if region.slice is not None and iv.slice != region.slice:
            continue
        if region.invocation is not None and iv.invocation != region.invocation:
            continue
        ivs.append(iv)
    if not ivs or not any(iv.result is not None for iv in ivs):
        raise UnknownRegion(f"no intervals for {region}")

    retired = sum(iv.result.retired for iv in ivs if iv.result is not None)
    if region.kind == WHOLE:
        start, end = ivs[0].start, ivs[-1].end
        spans = [(start, end)]
    else:
        spans = [(iv.start, iv.end) for iv in ivs if iv.result is not None]
    if counter is None:
        cycles = sum((e - s) // period for s, e in spans)
    else:
        cycles = sum(counter_delta(quantize_counter(s // period, counter),
                                   quantize_counter(e // period, counter), counter)
                     for s, e in spans)
    return RegionCounters(cycles, retired, region)


def ipc_speedup(dae: RegionCounters, baseline: RegionCounters) -> float:
    return dae.ipc / baseline.ipc


@dataclass(frozen=True)
class PowerModel:
    # mW per cluster per core frequency (MHz)
    active_mw: dict = field(default_factory=lambda: {"big": {2000: 1600.0}, "LITTLE": {1400: 400.0}})
    idle_mw: dict = field(default_factory=lambda: {"big": 80.0, "LITTLE": 20.0})

    def active(self, machine: MachineConfig, which: int) -> float:
        c = machine.cluster(which)
        try:
            return float(self.active_mw[c.name][c.core.frequency_mhz])
        except KeyError:
            raise KeyError(f"no active power for {c.name} at {c.core.frequency_mhz} MHz") from None

    def idle(self, machine: MachineConfig, which: int) -> float:
        return float(self.idle_mw[machine.cluster(which).name])


@dataclass
class RunMetrics:
    kernel: str = ""
    granularity: int = 0
    slice_count: int = 0
    policy: str = ""
    threads: str = ""
    execute_instructions: int = 0
    execute_cycles: int = 0
    execute_ipc: float = 0.0
    baseline_instructions: int = 0
    baseline_cycles: int = 0
    baseline_ipc: float = 0.0
    ipc_speedup: float = 0.0
    total_runtime_ns: float = 0.0
    baseline_runtime_ns: float = 0.0
    slowdown: float = 0.0
    access_ns: float = 0.0
    execute_ns: float = 0.0
    sync_ns: float = 0.0
    thread_ns: float = 0.0
    idle_ns: float = 0.0
    overlap_ns: float = 0.0
    little_time_fraction: float = 0.0
    big_active_ns: float = 0.0
    little_active_ns: float = 0.0
    execute_avg_load_cycles: float = 0.0
    src_L1: int = 0
    src_LocalL2: int = 0
    src_RemoteCluster: int = 0
    src_Memory: int = 0
    src_InFlight: int = 0
    prefetches_dropped: int = 0
    energy_mj: float = 0.0
    edp: float = 0.0

    @property
    def breakdown(self) -> dict[str, float]:
        return {"access_ns": self.access_ns, "execute_ns": self.execute_ns,
                "sync_ns": self.sync_ns, "thread_ns": self.thread_ns}


CSV_COLUMNS = tuple(f.name for f in fields(RunMetrics))


def summarize(tl: Timeline, machine: MachineConfig, kernel: str = "", granularity: int = 0,
              policy: str = "", threads: str = "", power: PowerModel | None = None,
              counter: CounterConfig | None = None) -> RunMetrics:
    """Per-run metrics that need no baseline."""
    ns = tl.ns
    total = tl.end()
    acc = exe = sync = thread = 0
    active = {BIG: 0, LITTLE: 0}
    for iv in tl.intervals:
        d = iv.end - iv.start
        if iv.tag in ACTIVE_TAGS:
            active[iv.core] += d
        if iv.tag == LOCK_OP:
            sync += d
        elif iv.tag in THREAD_TAGS and iv.core == BIG:
            thread += d
        elif iv.core == LITTLE and iv.tag in (ACCESS_SLICE, LOOP_CTL):
            acc += d
        elif iv.core == BIG and iv.tag in (EXECUTE_SLICE, LOOP_CTL):
            exe += d
    accounted = acc + exe + sync + thread
    rm = RunMetrics(kernel=kernel, granularity=granularity, slice_count=tl.slice_count,
                    policy=policy, threads=threads)
    rm.total_runtime_ns = ns(total)
    rm.access_ns, rm.execute_ns, rm.sync_ns, rm.thread_ns = ns(acc), ns(exe), ns(sync), ns(thread)
    rm.idle_ns = ns(max(0, total - accounted))
    rm.overlap_ns = ns(max(0, accounted - total))
    rm.little_time_fraction = acc / (acc + exe) if acc + exe else 0.0
    rm.big_active_ns, rm.little_active_ns = ns(active[BIG]), ns(active[LITTLE])

    inner = measure_region(tl, Region(INNER_LOOP, "execute"), machine, counter)
    rm.execute_cycles, rm.execute_instructions = inner.cycles, inner.retired_instructions
    rm.execute_ipc = inner.ipc if inner.cycles else 0.0
    loads = lat = 0
    for iv in tl.slices(EXECUTE_SLICE):
        r = iv.result
        loads += r.loads
        lat += r.load_latency_cycles
        for src, cnt in r.sources.items():
            setattr(rm, f"src_{src}", getattr(rm, f"src_{src}") + cnt)
    rm.execute_avg_load_cycles = lat / loads if loads else 0.0
    rm.prefetches_dropped = sum(tl.dropped_prefetches)
    if power is not None:
        rm.energy_mj, rm.edp = energy_edp(rm, machine, power)
    return rm


def attach_baseline(rm: RunMetrics, chunked: RunMetrics, unchunked: RunMetrics | None = None) -> RunMetrics:
    """Fill IPC speedup (same chunked region) and slowdown (vs unmodified loop)."""
    rm.baseline_instructions = chunked.execute_instructions
    rm.baseline_cycles = chunked.execute_cycles
    rm.baseline_ipc = chunked.execute_ipc
    if rm.baseline_cycles == 0 or rm.execute_cycles == 0:
        raise ZeroDivisionError("IPC speedup over a zero-cycle region")
    rm.ipc_speedup = rm.execute_ipc / rm.baseline_ipc
    ref = unchunked if unchunked is not None else chunked
    rm.baseline_runtime_ns = ref.total_runtime_ns
    rm.slowdown = rm.total_runtime_ns / rm.baseline_runtime_ns
    return rm


def energy_edp(rm: RunMetrics, machine: MachineConfig, power: PowerModel) -> tuple[float, float]:
    """Energy in mJ and energy-delay product in mJ*s.

    Each cluster draws active power while its core runs code (phase bodies,
    loop control, lock operations, thread management) and idle power for the
    rest of the run.
    """
    total = rm.total_runtime_ns
    energy_pj = 0.0
    for which, busy in ((BIG, rm.big_active_ns), (LITTLE, rm.little_active_ns)):
        energy_pj += busy * power.active(machine, which)
        energy_pj += (total - busy) * power.idle(machine, which)
    energy_mj = energy_pj * 1e-9
    return energy_mj, energy_mj * total * 1e-9


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def to_csv(rows: list[RunMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def from_csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))
