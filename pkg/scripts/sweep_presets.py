"""Run the default LockStep sweep of every preset and write reports under --out-dir."""

import argparse

from daebl.presets import PRESETS
from daebl.scenario import ScenarioConfig, run_scenario


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="out/presets")
    ap.add_argument("--quantized-counters", action="store_true")
    args = ap.parse_args()
    for name in PRESETS:
        cfg = ScenarioConfig(name, out_dir=args.out_dir, quantized_counters=args.quantized_counters)
        sweep, files = run_scenario(cfg)
        best = sweep.best()
        print(f"{name}: peak IPC speedup {best.ipc_speedup:.3f} at g={best.granularity}, "
              f"LITTLE share {best.little_time_fraction:.2f} -> {files['csv']}")


if __name__ == "__main__":
    main()
