#!/usr/bin/env python3
"""Sweep the bottleneck buffer across a 64x span (800 .. 51200 packets) on a
constant 300 Mbps link with a fixed 30 ms delay threshold, and report how
mean RTT and utilization respond."""

import argparse
import statistics

from ccguard import experiments, metrics
from ccguard.netsim import run_sim


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    print(f"{'buffer_pkts':>12} {'mean_rtt_ms':>12} {'p95_rtt_ms':>11} {'utilization':>12}")
    for buf in experiments.BUFFER_SWEEP_PKTS:
        rtts, p95s, utils = [], [], []
        for seed in range(1, args.seeds + 1):
            log = run_sim(experiments.buffer_sweep(buf, seed))
            log.check_conservation()
            s = metrics.summarize(log, warmup_s=10.0)
            rtts.append(s.mean_rtt_s)
            p95s.append(s.p95_rtt_s)
            utils.append(s.utilization)
        print(
            f"{buf:>12} {statistics.median(rtts) * 1e3:>12.2f} "
            f"{statistics.median(p95s) * 1e3:>11.2f} "
            f"{statistics.median(utils):>12.3f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
