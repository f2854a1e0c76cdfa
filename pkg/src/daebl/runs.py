"""Run entry points: coupled baseline, one DAE run, granularity sweeps."""

from __future__ import annotations

from dataclasses import dataclass, field

from daebl.kernel_ir import ValidatedKernel
from daebl.machine import MachineConfig
from daebl.metrics import CounterConfig, PowerModel, RunMetrics, attach_baseline, summarize
from daebl.scheduler import (
    Coupled, Hybrid, LockStep, SpawnPerInvocation, SyncPolicy, ThreadModel, Timeline,
    check_timeline, coupled_programs, dae_programs, policy_name, simulate,
)
from daebl.transform import PhasePair, chunk, make_phase_pair


@dataclass
class RunResult:
    metrics: RunMetrics
    timeline: Timeline


def thread_name(threads: ThreadModel | None) -> str:
    return "" if threads is None else type(threads).__name__


def run_coupled(kernel: ValidatedKernel, machine: MachineConfig, granularity: int | None = None,
                power: PowerModel | None = PowerModel(),
                counter: CounterConfig | None = None) -> RunResult:
    """Untransformed loop on the big core alone, cold caches."""
    g = granularity or kernel.iterations
    tl = simulate(coupled_programs(kernel, machine, g), machine)
    check_timeline(tl)
    rm = summarize(tl, machine, kernel.name, g, policy_name(Coupled()), "", power, counter)
    return RunResult(rm, tl)


def run_dae(pair: PhasePair, machine: MachineConfig, sync: SyncPolicy,
            threads: ThreadModel = SpawnPerInvocation(), power: PowerModel | None = PowerModel(),
            counter: CounterConfig | None = None, baseline: RunMetrics | None = None) -> RunResult:
    """Access on LITTLE, Execute on big, under ``sync`` and ``threads``.

    With ``baseline`` (a coupled run of the same kernel) the IPC speedup and
    slowdown columns are filled in.
    """
    tl = simulate(dae_programs(pair, machine, sync, threads), machine)
    strict = isinstance(sync, LockStep) and sync.lead_fraction == 1 or (
        isinstance(sync, Hybrid) and sync.resync_period_slices == 1 and sync.lead_fraction == 1)
    check_timeline(tl, lockstep=strict)
    rm = summarize(tl, machine, pair.kernel.name, pair.granularity, policy_name(sync),
                   thread_name(threads), power, counter)
    if baseline is not None:
        attach_baseline(rm, baseline)
    return RunResult(rm, tl)


@dataclass
class Sweep:
    baseline: RunResult
    runs: list[RunResult] = field(default_factory=list)

    @property
    def rows(self) -> list[RunMetrics]:
        return [r.metrics for r in self.runs]

    def best(self) -> RunMetrics:
        """Row with the highest Execute IPC speedup (smallest g on ties)."""
        return max(self.rows, key=lambda r: (r.ipc_speedup, -r.granularity))


def sweep_granularity(kernel: ValidatedKernel, machine: MachineConfig, granularities,
                      sync: SyncPolicy = LockStep(), threads: ThreadModel = SpawnPerInvocation(),
                      power: PowerModel | None = PowerModel(), counter: CounterConfig | None = None,
                      elide_predicates: bool = False) -> Sweep:
    """One coupled baseline plus one DAE run per granularity, in the given order."""
    gs = list(granularities)
    if not gs:
        raise ValueError("granularity list is empty")
    pairs = [make_phase_pair(chunk(kernel, g), elide_predicates) for g in gs]
    base = run_coupled(kernel, machine, None, power, counter)
    out = Sweep(base)
    for pair in pairs:
        out.runs.append(run_dae(pair, machine, sync, threads, power, counter, base.metrics))
    return out
