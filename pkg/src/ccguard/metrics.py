"""Run-log analysis: throughput, delay percentiles, fairness, timeseries.

An analysis window (t0, t1] selects packets by delivery time; utilization
divides the packets delivered in it by the trace's delivery opportunities
over the same endpoints (the opportunity count is [t0, t1), so the two can
disagree by at most the window's two boundary instants — within the +epsilon
play the utilization bound allows). Percentiles are nearest-rank (the
smallest sample such that at least p% of samples are <= it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .netsim import SimLog
from .traces import TraceSchedule, capacity_delivered

US_PER_S = 1_000_000

DEFAULT_WARMUP_S = 5.0


def jain_index(values) -> float:
    """Jain fairness index (sum x)^2 / (n * sum x^2) over nonnegative shares.

    At least one share must be positive; an empty or all-zero input has no
    defined fairness and is rejected.
    """
    xs = [float(v) for v in values]
    sq = sum(x * x for x in xs)
    if not xs or sq == 0.0:
        raise ValueError("jain_index needs at least one positive value")
    s = sum(xs)
    return s * s / (len(xs) * sq)


def percentile_nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile, p in (0, 100]. nan on empty input."""
    if not 0.0 < p <= 100.0:
        raise ValueError("percentile must be in (0, 100]")
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        return math.nan
    rank = math.ceil(p / 100.0 * arr.size)
    return float(arr[rank - 1])


@dataclass
class FlowMetrics:
    flow_id: str
    delivered: int
    dropped: int
    throughput_mbps: float
    mean_rtt_s: float
    p95_rtt_s: float
    mean_queuing_delay_s: float
    p95_queuing_delay_s: float
    loss_rate: float


@dataclass
class MetricsSummary:
    window_t0_s: float
    window_t1_s: float
    empty: bool                      # True when nothing was delivered in the window
    delivered: int
    dropped: int
    throughput_mbps: float
    utilization: float
    mean_rtt_s: float
    p95_rtt_s: float
    mean_queuing_delay_s: float
    p95_queuing_delay_s: float
    delay_vs_threshold: float        # mean RTT / delay threshold (nan if no threshold)
    jain_index: float
    flows: list[FlowMetrics] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "window_t0_s": self.window_t0_s,
            "window_t1_s": self.window_t1_s,
            "empty": self.empty,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "throughput_mbps": self.throughput_mbps,
            "utilization": self.utilization,
            "mean_rtt_s": self.mean_rtt_s,
            "p95_rtt_s": self.p95_rtt_s,
            "mean_queuing_delay_s": self.mean_queuing_delay_s,
            "p95_queuing_delay_s": self.p95_queuing_delay_s,
            "delay_vs_threshold": self.delay_vs_threshold,
            "jain_index": self.jain_index,
            "flows": [vars(f).copy() for f in self.flows],
        }
        return d


def _ledger_views(log: SimLog):
    flow = np.frombuffer(log.p_flow, dtype=np.int16)
    sent = np.frombuffer(log.p_sent_us, dtype=np.int64)
    delivered = np.frombuffer(log.p_delivered_us, dtype=np.int64)
    dropped = np.frombuffer(log.p_dropped_us, dtype=np.int64)
    return flow, sent, delivered, dropped


def summarize(
    log: SimLog,
    warmup_s: float = DEFAULT_WARMUP_S,
    end_s: float | None = None,
    threshold_s: float | None = None,
) -> MetricsSummary:
    """Aggregate and per-flow metrics over the window (warmup, end].

    ``threshold_s`` scales the mean RTT into the delay-vs-threshold ratio;
    when omitted it is recovered from the run's tick trail if every flow
    resolved the same delay threshold (the single-flow case), else the ratio
    is nan.
    """
    cfg = log.config
    if threshold_s is None:
        last_per_flow = {}
        for fi, th in zip(log.tick_flow, log.tick_threshold_s):
            last_per_flow[fi] = th
        thresholds = set(last_per_flow.values())
        if len(thresholds) == 1:
            threshold_s = thresholds.pop()
    t1_s = cfg.duration_s if end_s is None else end_s
    if not 0.0 <= warmup_s < t1_s:
        raise ValueError("need 0 <= warmup < end of analysis window")
    t0_us = round(warmup_s * US_PER_S)
    t1_us = round(t1_s * US_PER_S)
    window_s = t1_s - warmup_s
    owd_us = round(cfg.one_way_delay_s * US_PER_S)

    flow, sent, delivered, dropped = _ledger_views(log)
    in_window = (delivered > t0_us) & (delivered <= t1_us)
    drop_window = (dropped > t0_us) & (dropped <= t1_us)

    rtt_s = (delivered[in_window] + owd_us - sent[in_window]) * 1e-6
    qdelay_s = rtt_s - 2.0 * cfg.one_way_delay_s
    flows_in_window = flow[in_window]

    bits_per_pkt = 8.0 * cfg.packet_bytes
    capacity = capacity_delivered(cfg.schedule, warmup_s, t1_s)

    per_flow: list[FlowMetrics] = []
    tputs = []
    for fi, flow_id in enumerate(log.flow_ids):
        m = flows_in_window == fi
        n = int(m.sum())
        nd = int((flow[drop_window] == fi).sum())
        tput = n * bits_per_pkt / window_s / 1e6
        tputs.append(tput)
        f_rtt = rtt_s[m]
        f_q = qdelay_s[m]
        per_flow.append(
            FlowMetrics(
                flow_id=flow_id,
                delivered=n,
                dropped=nd,
                throughput_mbps=tput,
                mean_rtt_s=float(f_rtt.mean()) if n else math.nan,
                p95_rtt_s=percentile_nearest_rank(f_rtt, 95.0) if n else math.nan,
                mean_queuing_delay_s=float(f_q.mean()) if n else math.nan,
                p95_queuing_delay_s=percentile_nearest_rank(f_q, 95.0) if n else math.nan,
                loss_rate=nd / (n + nd) if (n + nd) else math.nan,
            )
        )

    n_total = int(in_window.sum())
    n_drops = int(drop_window.sum())
    empty = n_total == 0
    mean_rtt = float(rtt_s.mean()) if not empty else math.nan
    return MetricsSummary(
        window_t0_s=warmup_s,
        window_t1_s=t1_s,
        empty=empty,
        delivered=n_total,
        dropped=n_drops,
        throughput_mbps=n_total * bits_per_pkt / window_s / 1e6,
        utilization=(n_total / capacity) if capacity > 0 else math.nan,
        mean_rtt_s=mean_rtt,
        p95_rtt_s=percentile_nearest_rank(rtt_s, 95.0) if not empty else math.nan,
        mean_queuing_delay_s=float(qdelay_s.mean()) if not empty else math.nan,
        p95_queuing_delay_s=percentile_nearest_rank(qdelay_s, 95.0) if not empty else math.nan,
        delay_vs_threshold=(mean_rtt / threshold_s) if threshold_s else math.nan,
        jain_index=jain_index(tputs) if any(t > 0.0 for t in tputs) else math.nan,
        flows=per_flow,
    )


TIMESERIES_COLUMNS = (
    "t_s",
    "flow_id",
    "throughput_mbps",
    "rtt_ms_avg",
    "queuing_delay_ms_avg",
    "cwnd_pkts",
    "zone",
    "guardian_multiplier",
    "mu",
)


def timeseries(log: SimLog, bin_s: float = 1.0) -> list[dict]:
    """Per-flow, per-bin rows (bin label = bin start). Bins with no
    deliveries carry nan delay fields and zero throughput; guardian columns
    show the last tick in the bin (empty zone / multiplier 1 / nan mu when the
    flow ticked never or not in this bin)."""
    if bin_s <= 0.0:
        raise ValueError("bin_s must be positive")
    cfg = log.config
    n_bins = math.ceil(cfg.duration_s / bin_s - 1e-9)
    bin_us = round(bin_s * US_PER_S)
    owd_us = round(cfg.one_way_delay_s * US_PER_S)
    bits_per_pkt = 8.0 * cfg.packet_bytes

    flow, sent, delivered, dropped = _ledger_views(log)
    mask = delivered >= 0
    d_us = delivered[mask]
    rtt_all = (d_us + owd_us - sent[mask]) * 1e-6
    flow_all = flow[mask]
    # delivered>=0 selects queue-exit order; bin membership below just divides.
    bin_idx = np.minimum((d_us - 1) // bin_us, n_bins - 1)

    tick_t = np.asarray(log.tick_t_us, dtype=np.int64)
    tick_flow = np.asarray(log.tick_flow, dtype=np.int16)
    cwnd_t = np.asarray(log.cwnd_t_us, dtype=np.int64)
    cwnd_flow = np.asarray(log.cwnd_flow, dtype=np.int16)
    cwnd_val = np.asarray(log.cwnd_val, dtype=np.float64)

    rows: list[dict] = []
    for fi, flow_id in enumerate(log.flow_ids):
        fm = flow_all == fi
        f_bins = bin_idx[fm]
        f_rtt = rtt_all[fm]
        counts = np.bincount(f_bins, minlength=n_bins).astype(np.float64)
        rtt_sums = np.bincount(f_bins, weights=f_rtt, minlength=n_bins)

        f_tick_sel = np.nonzero(tick_flow == fi)[0]
        f_tick_t = tick_t[f_tick_sel]
        f_cwnd_sel = np.nonzero(cwnd_flow == fi)[0]
        f_cwnd_t = cwnd_t[f_cwnd_sel]
        f_cwnd_v = cwnd_val[f_cwnd_sel]

        for b in range(n_bins):
            t0 = b * bin_us
            t1 = min((b + 1) * bin_us, round(cfg.duration_s * US_PER_S))
            n = counts[b]
            rtt_avg = rtt_sums[b] / n if n else math.nan
            # last guardian tick in (t0, t1]
            k = np.searchsorted(f_tick_t, t1, side="right") - 1
            if k >= 0 and f_tick_t[k] > t0:
                gi = f_tick_sel[k]
                zone = log.tick_zone[gi]
                mult = log.tick_multiplier[gi]
                mu = log.tick_mean[gi]
            else:
                zone = ""
                mult = 1.0
                # mu persists between bins once the guardian has ticked
                mu = log.tick_mean[f_tick_sel[k]] if k >= 0 else math.nan
            # last known cwnd sample <= t1
            c = np.searchsorted(f_cwnd_t, t1, side="right") - 1
            cwnd = float(f_cwnd_v[c]) if c >= 0 else math.nan
            rows.append(
                {
                    "t_s": t0 / US_PER_S,
                    "flow_id": flow_id,
                    "throughput_mbps": n * bits_per_pkt / ((t1 - t0) / US_PER_S) / 1e6,
                    "rtt_ms_avg": rtt_avg * 1e3 if n else math.nan,
                    "queuing_delay_ms_avg": (rtt_avg - 2.0 * cfg.one_way_delay_s) * 1e3
                    if n
                    else math.nan,
                    "cwnd_pkts": cwnd,
                    "zone": zone,
                    "guardian_multiplier": mult,
                    "mu": mu,
                }
            )
    return rows


def time_to_utilization(
    log: SimLog,
    target: float,
    from_s: float,
    window_s: float = 1.0,
    step_s: float = 0.01,
) -> float | None:
    """Seconds after ``from_s`` until a trailing window first reaches the
    target utilization: smallest t >= from_s + window with
    delivered(t-window, t] >= target * capacity(t-window, t]. None if never.
    """
    if not 0.0 < target <= 1.0:
        raise ValueError("target utilization must be in (0, 1]")
    cfg = log.config
    _, _, delivered, _ = _ledger_views(log)
    d_sorted = np.sort(delivered[delivered >= 0])
    t = from_s + window_s
    while t <= cfg.duration_s + 1e-9:
        t0_us = round((t - window_s) * US_PER_S)
        t1_us = round(t * US_PER_S)
        got = np.searchsorted(d_sorted, t1_us, side="right") - np.searchsorted(
            d_sorted, t0_us, side="right"
        )
        need = target * capacity_delivered(cfg.schedule, t - window_s, t)
        if got >= need:
            return t - from_s
        t += step_s
    return None
