"""Coupled, LockStep, Timed (perfect sleeps) and Hybrid for each preset at one granularity."""

import argparse

from daebl.kernel_ir import validate_kernel
from daebl.machine import exynos5422
from daebl.presets import PRESETS, preset
from daebl.scenario import comparison_table, compare_policies

DEFAULT_G = {"lbm_like": 1024, "cigar_like": 1024, "libquantum_like": 4096}


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--jitter-ns", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    m = exynos5422()
    for name in PRESETS:
        p = preset(name)
        res = compare_policies(validate_kernel(p.spec), m, DEFAULT_G[name], p.threads,
                               jitter_stddev_ns=args.jitter_ns, seed=args.seed)
        print(f"# {name} g={DEFAULT_G[name]}")
        print(comparison_table(res))


if __name__ == "__main__":
    main()
