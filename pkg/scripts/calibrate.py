"""Print best-g IPC speedup, slowdown and LITTLE-time fraction per preset."""

import argparse
import time

from daebl.kernel_ir import validate_kernel
from daebl.machine import exynos5422
from daebl.presets import PRESETS, preset
from daebl.runs import sweep_granularity


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--presets", nargs="*", default=list(PRESETS))
    ap.add_argument("--scale", type=float, default=1.0, help="latency scale factor")
    args = ap.parse_args()
    m = exynos5422()
    if args.scale != 1.0:
        m = m.scaled_latencies(args.scale)
    for name in args.presets:
        p = preset(name)
        k = validate_kernel(p.spec)
        t = time.time()
        sw = sweep_granularity(k, m, p.granularities, threads=p.threads)
        b = sw.baseline.metrics
        print(f"{name}: baseline IPC {b.execute_ipc:.3f} runtime {b.total_runtime_ns/1e3:.1f} us "
              f"({time.time() - t:.1f} s)")
        for r in sw.rows:
            print(f"  g={r.granularity:6d} ipc={r.execute_ipc:.3f} speedup={r.ipc_speedup:.3f} "
                  f"slowdown={r.slowdown:.2f} little={r.little_time_fraction:.2f} "
                  f"drop={r.prefetches_dropped} src=L1:{r.src_L1} L2:{r.src_LocalL2} "
                  f"R:{r.src_RemoteCluster} M:{r.src_Memory} F:{r.src_InFlight}")


if __name__ == "__main__":
    main()
