"""Scenario files, report writing and policy comparison."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from daebl.kernel_io import load_kernel
from daebl.kernel_ir import ValidatedKernel, validate_kernel
from daebl.machine import BIG, MachineConfig, exynos5422, load_machine
from daebl.metrics import CounterConfig, PowerModel, attach_baseline, to_csv
from daebl.presets import PRESETS, preset
from daebl.runs import RunResult, Sweep, run_coupled, run_dae, sweep_granularity
from daebl.scheduler import (
    ACCESS_SLICE, EXECUTE_SLICE, SLEEP, Coupled, Hybrid, LockStep, Pool, SpawnPerInvocation,
    SyncPolicy, ThreadModel, Timed, Timeline, dae_programs, policy_name, set_overlap, simulate,
    validate_policy,
)
from daebl.transform import chunk, make_phase_pair


class ScenarioError(ValueError):
    """Bad scenario file or field."""


@dataclass
class ScenarioConfig:
    kernel: str
    kernel_params: dict = field(default_factory=dict)
    machine: str | None = None
    granularities: list[int] | None = None
    policy: dict = field(default_factory=lambda: {"kind": "LockStep"})
    threads: dict | None = None
    out_dir: str = "out"
    rng_seed: int = 0
    quantized_counters: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ScenarioError(f"unknown scenario fields: {sorted(extra)}")
        if "kernel" not in d:
            raise ScenarioError("scenario needs a 'kernel'")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from None
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object")
    cfg = ScenarioConfig.from_dict(d)
    if cfg.machine is not None and not Path(cfg.machine).is_absolute():
        cfg.machine = str(Path(path).parent / cfg.machine)
    if cfg.kernel not in PRESETS and not Path(cfg.kernel).is_absolute():
        cfg.kernel = str(Path(path).parent / cfg.kernel)
    return cfg


def resolve_kernel(ref: str, params: dict | None = None) -> tuple[ValidatedKernel, tuple[int, ...], ThreadModel]:
    """Preset name or kernel file -> (kernel, default grid, default thread model)."""
    params = params or {}
    if ref in PRESETS:
        try:
            p = preset(ref, **params)
        except TypeError as e:
            raise ScenarioError(f"bad parameters for {ref}: {e}") from None
        return validate_kernel(p.spec), p.granularities, p.threads
    if params:
        raise ScenarioError("kernel parameters only apply to presets")
    path = Path(ref)
    if not path.exists():
        raise ScenarioError(f"no preset or kernel file named {ref!r}")
    k = validate_kernel(load_kernel(path))
    n = k.iterations
    grid = tuple(g for g in (64, 256, 1024, 4096) if g < n) or (n,)
    return k, grid, SpawnPerInvocation()


def resolve_machine(path: str | None) -> MachineConfig:
    if path is None:
        return exynos5422()
    if not Path(path).exists():
        raise ScenarioError(f"machine file {path!r} not found")
    return load_machine(path)


def make_policy(d: dict, seed: int | None = None) -> SyncPolicy:
    """Policy from a dict such as ``{"kind": "Hybrid", "resync_period_slices": 4, ...}``."""
    d = dict(d)
    kind = d.pop("kind", None)
    lead = d.pop("lead_fraction", None)
    try:
        if kind == "Coupled":
            pol = Coupled()
        elif kind == "LockStep":
            pol = LockStep()
        elif kind == "Timed":
            pol = Timed(**_timed_fields(d, seed))
            d = {}
        elif kind == "Hybrid":
            period = d.pop("resync_period_slices", 4)
            inner = d.pop("inner", None) or d
            pol = Hybrid(Timed(**_timed_fields(dict(inner), seed)), period)
            d = {}
        else:
            raise ScenarioError(f"unknown policy kind {kind!r}")
    except TypeError as e:
        raise ScenarioError(f"bad policy fields: {e}") from None
    if d:
        raise ScenarioError(f"unexpected fields for {kind}: {sorted(d)}")
    if lead is not None:
        pol = set_overlap(pol, float(lead))
    validate_policy(pol)
    return pol


def _timed_fields(d: dict, seed: int | None) -> dict:
    for k in ("sleep_access_ns", "sleep_execute_ns"):
        if isinstance(d.get(k), list):
            d[k] = tuple(d[k])
    if seed is not None:
        d["rng_seed"] = seed
    return d


def make_threads(d: dict | None, default: ThreadModel) -> ThreadModel:
    if d is None:
        return default
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "Spawn":
            return SpawnPerInvocation(**d)
        if kind == "Pool":
            return Pool(**d)
    except TypeError as e:
        raise ScenarioError(f"bad thread fields: {e}") from None
    raise ScenarioError(f"unknown thread model {kind!r}")


def summary_text(sweep: Sweep, policy: str) -> str:
    base = sweep.baseline.metrics
    best = sweep.best()
    lines = [
        f"kernel {base.kernel}  policy {policy}  threads {sweep.rows[0].threads}",
        f"coupled baseline: IPC {base.execute_ipc:.4f}  runtime {base.total_runtime_ns / 1e6:.3f} ms",
        "",
        f"{'g':>8} {'slices':>7} {'exec IPC':>9} {'IPC gain':>9} {'slowdown':>9} {'LITTLE':>7}",
    ]
    for r in sweep.rows:
        lines.append(f"{r.granularity:>8} {r.slice_count:>7} {r.execute_ipc:>9.4f} {r.ipc_speedup:>9.4f}"
                     f" {r.slowdown:>9.3f} {r.little_time_fraction:>7.3f}")
    lines += ["", f"peak IPC speedup {best.ipc_speedup:.4f} at g={best.granularity}"
              f" (slowdown {best.slowdown:.3f})"]
    return "\n".join(lines) + "\n"


def timeline_json(runs: dict[str, Timeline]) -> str:
    return json.dumps({k: tl.events() for k, tl in runs.items()}, separators=(",", ":"))


def run_scenario(cfg: ScenarioConfig) -> tuple[Sweep, dict[str, Path]]:
    """Sweep one kernel and write ``<kernel>.csv``, ``<kernel>.timeline.json`` and ``<kernel>.txt``.

    The timeline file holds the coupled baseline and the best-IPC run.
    """
    kernel, grid, threads0 = resolve_kernel(cfg.kernel, cfg.kernel_params)
    machine = resolve_machine(cfg.machine)
    gs = grid if cfg.granularities is None else tuple(cfg.granularities)
    if not gs:
        raise ScenarioError("granularity list is empty")
    sync = make_policy(cfg.policy, cfg.rng_seed)
    threads = make_threads(cfg.threads, threads0)
    counter = CounterConfig() if cfg.quantized_counters else None
    sweep = sweep_granularity(kernel, machine, gs, sync, threads, PowerModel(), counter)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = kernel.name
    best = sweep.best()
    best_tl = next(r.timeline for r in sweep.runs if r.metrics is best)
    files = {
        "csv": out / f"{stem}.csv",
        "timeline": out / f"{stem}.timeline.json",
        "summary": out / f"{stem}.txt",
    }
    files["csv"].write_text(to_csv(sweep.rows))
    files["timeline"].write_text(timeline_json(
        {"baseline": sweep.baseline.timeline, f"g={best.granularity}": best_tl}))
    files["summary"].write_text(summary_text(sweep, policy_name(sync)))
    return sweep, files


def perfect_sleeps(kernel: ValidatedKernel, machine: MachineConfig, granularity: int,
                   threads: ThreadModel = SpawnPerInvocation()) -> tuple[float, ...]:
    """Execute sleeps, one per (invocation, slice), that start each Execute slice as its Access slice ends.

    Derived from a run where every Execute sleep is replaced by a wait on the
    matching Access release (at no lock cost); the recorded waits are the
    sleeps, so a Timed run with them reproduces that timeline.
    """
    pair = make_phase_pair(chunk(kernel, granularity))
    progs = dae_programs(pair, machine, Timed(0.0, 0.0), threads)
    keyed = []
    for i, act in enumerate(progs.big):
        if act[0] == "sleep":
            nxt = progs.big[i + 1]
            keyed.append(("wait", ("E", nxt[2], nxt[3]), SLEEP))
        else:
            keyed.append(act)
    tl = simulate(replace(progs, big=keyed), machine)
    waits = {(iv.invocation, iv.slice): 0 for iv in tl.slices(EXECUTE_SLICE)}
    nxt_slice = {}
    for iv in tl.core(BIG):
        if iv.tag == EXECUTE_SLICE:
            nxt_slice[iv.start] = (iv.invocation, iv.slice)
    for iv in tl.core(BIG):
        if iv.tag == SLEEP and iv.end in nxt_slice:
            waits[nxt_slice[iv.end]] = iv.end - iv.start
    n, inv = pair.slice_count, kernel.spec.invocations
    return tuple(tl.ns(waits[i, s]) for i in range(inv) for s in range(n))


def mean_slice_ns(tl: Timeline) -> float:
    ivs = tl.slices(ACCESS_SLICE) + tl.slices(EXECUTE_SLICE)
    return sum(tl.ns(iv.end - iv.start) for iv in ivs) / len(ivs) if ivs else 0.0


def compare_policies(kernel: ValidatedKernel, machine: MachineConfig, granularity: int,
                     threads: ThreadModel = SpawnPerInvocation(), resync_period: int = 4,
                     jitter_stddev_ns: float = 0.0, seed: int = 0,
                     power: PowerModel | None = PowerModel(),
                     counter: CounterConfig | None = None) -> list[RunResult]:
    """Coupled, LockStep, Timed with perfect sleeps and Hybrid on identical inputs."""
    pair = make_phase_pair(chunk(kernel, granularity))
    base = run_coupled(kernel, machine, None, power, counter)
    attach_baseline(base.metrics, base.metrics)
    sleeps = perfect_sleeps(kernel, machine, granularity, threads)
    timed = Timed(0.0, sleeps, jitter_stddev_ns, seed)
    out = [base]
    for sync in (LockStep(), timed, Hybrid(timed, resync_period)):
        out.append(run_dae(pair, machine, sync, threads, power, counter, base.metrics))
    return out


COMPARE_COLUMNS = ("policy", "total_runtime_ns", "slowdown", "execute_instructions", "execute_ipc",
                   "ipc_speedup", "sync_ns", "thread_ns", "idle_ns", "energy_mj")


def comparison_table(results: list[RunResult]) -> str:
    rows = [",".join(COMPARE_COLUMNS)]
    for r in results:
        d = asdict(r.metrics)
        rows.append(",".join(f"{d[c]:.6f}" if isinstance(d[c], float) else str(d[c])
                             for c in COMPARE_COLUMNS))
    return "\n".join(rows) + "\n"
