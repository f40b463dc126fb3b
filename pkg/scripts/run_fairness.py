#!/usr/bin/env python3
"""Run staggered guarded flows on one shared queue and print per-flow
throughput plus the Jain fairness index over the final window."""

import argparse

from ccguard import experiments, metrics
from ccguard.netsim import run_sim


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--flows", type=int, default=3)
    ap.add_argument("--gap-s", type=float, default=30.0)
    ap.add_argument("--rate", type=float, default=120.0)
    ap.add_argument("--duration", type=float, default=120.0)
    ap.add_argument("--window", type=float, default=30.0)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    cfg = experiments.fairness(
        n_flows=args.flows, gap_s=args.gap_s, seed=args.seed,
        rate_mbps=args.rate, duration_s=args.duration,
    )
    log = run_sim(cfg)
    log.check_conservation()
    s = metrics.summarize(log, warmup_s=args.duration - args.window)
    for f in s.flows:
        print(f"{f.flow_id}: {f.throughput_mbps:6.2f} Mbps over the final {args.window:.0f} s")
    print(f"jain index: {s.jain_index:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
