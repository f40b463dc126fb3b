#!/usr/bin/env python3
"""Compare cold-start ramp speed: guarded controller vs plain additive
increase, both starting from a one-packet window on a 300 Mbps link."""

import argparse
import statistics

from ccguard import experiments
from ccguard.netsim import run_sim
from ccguard.theory import rampup_tick_bound


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20, help="number of guarded seeds")
    args = ap.parse_args()

    ticks = []
    for seed in range(1, args.seeds + 1):
        log = run_sim(experiments.rampup("guarded", seed, duration_s=3.0))
        wm = log.watermark_us[0]
        if wm < 0:
            print(f"seed {seed}: never reached 500 packets")
            continue
        ticks.append(sum(1 for t in log.tick_t_us if t <= wm))
    print(
        f"guarded: median {statistics.median(ticks):.0f} guardian ticks to reach "
        f"the 500-packet BDP over {len(ticks)} seeds "
        f"(range {min(ticks)}-{max(ticks)}, bound {rampup_tick_bound(500.0):.2f})"
    )

    log = run_sim(experiments.rampup("aimd", 1, duration_s=15.0))
    wm = log.watermark_us[0]
    if wm < 0:
        print("additive-only: did not reach 500 packets within the horizon")
    else:
        print(
            f"additive-only: {wm * 1e-6:.3f} s = {wm * 1e-6 / 0.020:.1f} RTTs "
            f"to reach 500 packets"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
