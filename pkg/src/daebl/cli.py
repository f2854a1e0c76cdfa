"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from daebl.kernel_ir import KernelError
from daebl.machine import ConfigError
from daebl.metrics import CounterConfig, PowerModel
from daebl.oracle import OracleTooLarge, diff_timelines, run_oracle
from daebl.runs import run_coupled, run_dae
from daebl.scenario import (
    ScenarioConfig, ScenarioError, compare_policies, comparison_table, load_scenario,
    resolve_kernel, resolve_machine, run_scenario,
)
from daebl.scheduler import Coupled, Hybrid, LockStep, Timed, policy_name
from daebl.transform import GranularityOutOfRange, chunk, make_phase_pair

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_MISMATCH = 3

VALIDATION_ERRORS = (KernelError, ConfigError, ScenarioError, GranularityOutOfRange, OracleTooLarge)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _param(text: str) -> tuple[str, int]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, int(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"preset parameter {key} must be an integer") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed for timed policies")
    p.add_argument("--out-dir", default=None, help="directory for reports")
    p.add_argument("--quantized-counters", action="store_true",
                   help="measure cycles through an emulated divided 32-bit counter")


def _kernel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", required=True, help="preset name or kernel file")
    p.add_argument("--param", type=_param, action="append", default=[],
                   help="preset parameter, e.g. n=512 (repeatable)")
    p.add_argument("--machine", default=None, help="machine JSON file (default: built-in)")


def _policy_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policy", choices=["lockstep", "timed", "hybrid", "coupled"], default="lockstep")
    p.add_argument("--sleep-access-ns", type=float, default=0.0)
    p.add_argument("--sleep-execute-ns", type=float, default=0.0)
    p.add_argument("--jitter-ns", type=float, default=0.0)
    p.add_argument("--resync-period", type=int, default=4)
    p.add_argument("--lead-fraction", type=float, default=None)
    p.add_argument("--threads", choices=["spawn", "pool"], default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="daebl", description="Decoupled access/execute on big.LITTLE, simulated.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario")
    _common(p)

    p = sub.add_parser("sweep", help="granularity sweep from flags")
    _kernel_args(p)
    p.add_argument("--granularities", type=_int_list, default=None)
    _policy_args(p)
    _common(p)

    p = sub.add_parser("oracle-check", help="compare the simulator with the brute-force oracle")
    _kernel_args(p)
    p.add_argument("--granularities", type=_int_list, default=None,
                   help="default: N, N/4, N/16 and 64")
    p.add_argument("--policies", default="lockstep,timed,hybrid")
    p.add_argument("--jitter-ns", type=float, default=200.0)
    p.add_argument("--resync-period", type=int, default=4)
    _common(p)

    p = sub.add_parser("compare-policies", help="Coupled, LockStep, Timed and Hybrid side by side")
    _kernel_args(p)
    p.add_argument("--granularity", type=int, required=True)
    p.add_argument("--jitter-ns", type=float, default=0.0)
    p.add_argument("--resync-period", type=int, default=4)
    _common(p)
    return ap


def _policy_dict(a: argparse.Namespace) -> dict:
    timed = {"sleep_access_ns": a.sleep_access_ns, "sleep_execute_ns": a.sleep_execute_ns,
             "jitter_stddev_ns": a.jitter_ns}
    d = {"lockstep": {"kind": "LockStep"}, "coupled": {"kind": "Coupled"},
         "timed": {"kind": "Timed", **timed},
         "hybrid": {"kind": "Hybrid", "resync_period_slices": a.resync_period, **timed}}[a.policy]
    if a.lead_fraction is not None:
        d["lead_fraction"] = a.lead_fraction
    return d


def _emit(text: str, out_dir: str | None, name: str) -> None:
    sys.stdout.write(text)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / name).write_text(text)


def cmd_run(a: argparse.Namespace) -> int:
    cfg = load_scenario(a.scenario)
    if a.seed is not None:
        cfg.rng_seed = a.seed
    if a.out_dir is not None:
        cfg.out_dir = a.out_dir
    cfg.quantized_counters = cfg.quantized_counters or a.quantized_counters
    return _run_cfg(cfg)


def _run_cfg(cfg: ScenarioConfig) -> int:
    _, files = run_scenario(cfg)
    sys.stdout.write(files["summary"].read_text())
    for f in files.values():
        print(f"wrote {f}")
    return EXIT_OK


def cmd_sweep(a: argparse.Namespace) -> int:
    if a.policy == "coupled":
        raise ScenarioError("sweep needs a decoupled policy")
    threads = None if a.threads is None else {"kind": "Spawn" if a.threads == "spawn" else "Pool"}
    cfg = ScenarioConfig(kernel=a.kernel, kernel_params=dict(a.param), machine=a.machine,
                         granularities=a.granularities, policy=_policy_dict(a), threads=threads,
                         out_dir=a.out_dir or "out", rng_seed=a.seed or 0,
                         quantized_counters=a.quantized_counters)
    return _run_cfg(cfg)


def cmd_oracle_check(a: argparse.Namespace) -> int:
    kernel, _, threads = resolve_kernel(a.kernel, dict(a.param))
    machine = resolve_machine(a.machine)
    n = kernel.iterations
    gs = a.granularities or sorted({n, max(1, n // 4), max(1, n // 16), min(64, n)}, reverse=True)
    seed = a.seed or 0
    timed = Timed(0.0, 0.0, a.jitter_ns, seed)
    table = {"lockstep": LockStep(), "timed": timed, "hybrid": Hybrid(timed, a.resync_period),
             "coupled": Coupled()}
    names = [x.strip() for x in a.policies.split(",") if x.strip()]
    unknown = [x for x in names if x not in table]
    if unknown:
        raise ScenarioError(f"unknown policies {unknown}")
    bad = 0
    lines = []
    for g in gs:
        pair = make_phase_pair(chunk(kernel, g))
        for name in names:
            sync = table[name]
            if isinstance(sync, Coupled):
                tl = run_coupled(kernel, machine, g, None).timeline
            else:
                tl = run_dae(pair, machine, sync, threads, None).timeline
            diffs = diff_timelines(tl, run_oracle(kernel, machine, sync, g, threads))
            bad += bool(diffs)
            lines.append(f"{kernel.name} g={g} {policy_name(sync)}: {'MISMATCH' if diffs else 'ok'}")
            lines += [f"  {d}" for d in diffs[:5]]
    _emit("\n".join(lines) + "\n", a.out_dir, f"{kernel.name}.oracle.txt")
    return EXIT_MISMATCH if bad else EXIT_OK


def cmd_compare(a: argparse.Namespace) -> int:
    kernel, _, threads = resolve_kernel(a.kernel, dict(a.param))
    machine = resolve_machine(a.machine)
    counter = CounterConfig() if a.quantized_counters else None
    res = compare_policies(kernel, machine, a.granularity, threads, a.resync_period, a.jitter_ns,
                           a.seed or 0, PowerModel(), counter)
    _emit(comparison_table(res), a.out_dir, f"{kernel.name}.policies.csv")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "oracle-check": cmd_oracle_check,
            "compare-policies": cmd_compare}


def main(argv: list[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return COMMANDS[a.command](a)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
