#!/usr/bin/env python3
"""Run the capacity-step ablations:

* 100 -> 720 Mbps jump: time to 90% utilization for each exploration mode.
* 720 -> 100 Mbps collapse: transition p95 queuing delay with and without
  the slowdown module, and the no-slowdown/no-mitigation baseline's time to
  return below the delay threshold.
"""

import argparse
import math
import statistics

import numpy as np

from ccguard import experiments, metrics
from ccguard.netsim import run_sim


def t90(cfg):
    log = run_sim(cfg)
    log.check_conservation()
    t = metrics.time_to_utilization(
        log, 0.90, from_s=experiments.STEP_UP_AT_S, window_s=0.1
    )
    return math.inf if t is None else t


def drain_p95(variant, seeds):
    vals = []
    for seed in seeds:
        log = run_sim(experiments.step_down_drain(variant, seed))
        s = metrics.summarize(log, warmup_s=20.0, end_s=25.0)
        vals.append(s.p95_queuing_delay_s)
    return statistics.median(vals)


def return_time(seed, threshold_s=0.030):
    log = run_sim(experiments.step_down_drain("no-slowdown-no-mitigation", seed))
    sent = np.asarray(log.p_sent_us, dtype=np.int64)
    dlv = np.asarray(log.p_delivered_us, dtype=np.int64)
    ok = dlv >= 0
    t_s = dlv[ok] * 1e-6
    rtt_s = (dlv[ok] - sent[ok]) * 1e-6
    after = experiments.STEP_DOWN_DRAIN_AT_S
    m = (t_s > after) & (t_s <= after + 5.0) & (rtt_s < threshold_s)
    return float(t_s[m].min() - after) if m.any() else math.inf


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    seeds = range(1, args.seeds + 1)

    print("== capacity jump 100 -> 720 Mbps: time to 90% utilization ==")
    stoch = [t90(experiments.step_up("stochastic", s)) for s in seeds]
    print(f"stochastic exploration: median {statistics.median(stoch):.2f} s {sorted(round(v, 2) for v in stoch)}")
    print(f"deterministic exploration: {t90(experiments.step_up('deterministic', 1)):.2f} s")
    print(f"exploration off: {t90(experiments.step_up('off', 1)):.2f} s")

    print("== capacity collapse 720 -> 100 Mbps: transition p95 queuing delay ==")
    full = drain_p95("full", seeds)
    nosd = drain_p95("no-slowdown", seeds)
    print(f"slowdown on:  {full * 1e3:.2f} ms (median over {args.seeds} seeds)")
    print(f"slowdown off: {nosd * 1e3:.2f} ms -> ratio {nosd / full:.2f}x")

    rts = [return_time(s) for s in seeds]
    med = statistics.median(rts)
    print(
        "slowdown+mitigation off: median time to return below the threshold "
        f"= {med if math.isfinite(med) else math.inf} s "
        f"({sum(1 for t in rts if math.isinf(t))}/{args.seeds} seeds never return)"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
