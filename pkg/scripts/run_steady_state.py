#!/usr/bin/env python3
"""Run the steady-state scenario (constant 300 Mbps, fixed 40 ms threshold)
for one or more seeds and print per-seed delay/throughput numbers."""

import argparse

from ccguard import experiments, metrics
from ccguard.netsim import run_sim
from ccguard.theory import steady_state_delay_bound


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="1,2,3", help="comma-separated seeds")
    ap.add_argument("--duration", type=float, default=120.0)
    ap.add_argument("--warmup", type=float, default=20.0)
    args = ap.parse_args()

    bound = steady_state_delay_bound(500.0, 0.020)
    print(f"closed-form mean queuing-delay bound: {bound * 1e3:.2f} ms")
    for seed in [int(s) for s in args.seeds.split(",") if s]:
        log = run_sim(experiments.steady_state(seed, duration_s=args.duration))
        log.check_conservation()
        s = metrics.summarize(log, warmup_s=args.warmup)
        print(
            f"seed {seed}: mean queuing delay {s.mean_queuing_delay_s * 1e3:6.2f} ms, "
            f"p95 RTT {s.p95_rtt_s * 1e3:6.2f} ms, "
            f"throughput {s.throughput_mbps:6.1f} Mbps, util {s.utilization:.3f}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
