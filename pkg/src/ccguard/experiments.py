"""Pre-registered experiment scenarios.

Each builder returns a ready SimConfig; the CLI, the scripts and the
acceptance tests all construct runs through these, so scenario parameters are
defined exactly once. Defaults shared by the study:

* minimum RTT 20 ms (10 ms propagation each way)
* 1500-byte packets, so 300 Mbps <=> a 500-packet bandwidth-delay product
* deep drop-tail buffer of 3200 packets unless a scenario sweeps it
"""

from __future__ import annotations

from dataclasses import replace

from .guardian import GuardianConfig
from .netsim import INFINITE_BUFFER, FlowSpec, SimConfig
from .traces import TraceSchedule, synth_constant, synth_step

MIN_RTT_S = 0.020
OWD_S = MIN_RTT_S / 2.0
DEEP_BUFFER = 3200


def bdp_packets(rate_mbps: float, rtt_s: float = MIN_RTT_S, packet_bytes: int = 1500) -> float:
    return rate_mbps * 1e6 * rtt_s / (8 * packet_bytes)


def guarded_flow(
    flow_id: str = "flow0",
    threshold_multiplier: float | None = 1.5,
    threshold_fixed_s: float | None = None,
    exploration: str = "stochastic",
    slowdown: bool = True,
    mitigation: bool = True,
    **kwargs,
) -> FlowSpec:
    guardian = GuardianConfig(
        threshold_multiplier=None if threshold_fixed_s is not None else threshold_multiplier,
        threshold_fixed_s=threshold_fixed_s,
        exploration=exploration,
        slowdown=slowdown,
        mitigation=mitigation,
    )
    return FlowSpec(flow_id=flow_id, controller="guarded", guardian=guardian, **kwargs)


def aimd_flow(flow_id: str = "flow0", **kwargs) -> FlowSpec:
    return FlowSpec(flow_id=flow_id, controller="aimd", **kwargs)


def steady_state(seed: int, duration_s: float = 120.0) -> SimConfig:
    """One guarded flow on a constant 300 Mbps link (BDP 500 packets),
    fixed 40 ms delay threshold, unbounded buffer."""
    return SimConfig(
        schedule=synth_constant(300.0, 1.0),
        duration_s=duration_s,
        one_way_delay_s=OWD_S,
        buffer_pkts=INFINITE_BUFFER,
        seed=seed,
        flows=[guarded_flow(threshold_fixed_s=0.040)],
    )


def rampup(controller: str, seed: int, duration_s: float = 30.0) -> SimConfig:
    """Cold start from a one-packet window straight into congestion
    avoidance, 300 Mbps, unbounded buffer. The watermark captures the first
    instant cwnd reaches the BDP (500 packets)."""
    common = dict(
        cwnd_init=1.0,
        cwnd_floor=1.0,
        start_in_avoidance=True,
    )
    if controller == "guarded":
        flow = guarded_flow(threshold_fixed_s=0.040, **common)
    elif controller == "aimd":
        flow = aimd_flow(**common)
    else:
        raise ValueError(f"unknown controller {controller!r}")
    return SimConfig(
        schedule=synth_constant(300.0, 1.0),
        duration_s=duration_s,
        one_way_delay_s=OWD_S,
        buffer_pkts=INFINITE_BUFFER,
        seed=seed,
        flows=[flow],
        cwnd_watermark=500.0,
    )


STEP_DOWN_HEAVY_AT_S = 20.0


def step_down_heavy(controller: str, seed: int) -> SimConfig:
    """600 -> 300 Mbps halving at t=20 s, fixed 40 ms threshold, deep buffer.
    Contrasts the guarded controller with plain AIMD on a loss-free capacity
    drop (the buffer is deep enough that AIMD just fills it)."""
    if controller == "guarded":
        flow = guarded_flow(threshold_fixed_s=0.040)
    elif controller == "aimd":
        flow = aimd_flow()
    else:
        raise ValueError(f"unknown controller {controller!r}")
    return SimConfig(
        schedule=synth_step([(600.0, 20.0), (300.0, 20.0)]),
        duration_s=30.0,
        one_way_delay_s=OWD_S,
        buffer_pkts=DEEP_BUFFER,
        seed=seed,
        flows=[flow],
    )


STEP_UP_AT_S = 20.0

STEP_UP_VARIANTS = ("stochastic", "deterministic", "off")


def step_up(exploration: str, seed: int) -> SimConfig:
    """100 -> 720 Mbps step at t=20 s (capacity x7.2), default 1.5x
    threshold, deep buffer. Variants toggle the exploration mode."""
    if exploration not in STEP_UP_VARIANTS:
        raise ValueError(f"exploration must be one of {STEP_UP_VARIANTS}")
    return SimConfig(
        schedule=synth_step([(100.0, 20.0), (720.0, 25.0)]),
        duration_s=45.0,
        one_way_delay_s=OWD_S,
        buffer_pkts=DEEP_BUFFER,
        seed=seed,
        flows=[guarded_flow(exploration=exploration)],
    )


STEP_DOWN_DRAIN_AT_S = 20.0

STEP_DOWN_DRAIN_VARIANTS = ("full", "no-slowdown", "no-slowdown-no-mitigation")


def step_down_drain(variant: str, seed: int) -> SimConfig:
    """720 -> 100 Mbps collapse at t=20 s (capacity /7.2), default 1.5x
    threshold, deep buffer. Ablations peel off the proactive trim and then
    the critical-zone cut."""
    if variant == "full":
        flow = guarded_flow()
    elif variant == "no-slowdown":
        flow = guarded_flow(slowdown=False)
    elif variant == "no-slowdown-no-mitigation":
        flow = guarded_flow(slowdown=False, mitigation=False)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return SimConfig(
        schedule=synth_step([(720.0, 20.0), (100.0, 15.0)]),
        duration_s=35.0,
        one_way_delay_s=OWD_S,
        buffer_pkts=DEEP_BUFFER,
        seed=seed,
        flows=[flow],
    )


BUFFER_SWEEP_PKTS = (800, 3200, 12800, 51200)


def buffer_sweep(buffer_pkts: int, seed: int, duration_s: float = 40.0) -> SimConfig:
    """Constant 300 Mbps with a fixed 30 ms threshold across four buffer
    depths spanning 64x; the guarded controller should not care."""
    return SimConfig(
        schedule=synth_constant(300.0, 1.0),
        duration_s=duration_s,
        one_way_delay_s=OWD_S,
        buffer_pkts=buffer_pkts,
        seed=seed,
        flows=[guarded_flow(threshold_fixed_s=0.030)],
    )


def fairness(
    n_flows: int = 3,
    gap_s: float = 30.0,
    seed: int = 1,
    rate_mbps: float = 120.0,
    duration_s: float = 120.0,
) -> SimConfig:
    """Staggered guarded flows sharing one queue on a constant link."""
    if n_flows < 1:
        raise ValueError("need at least one flow")
    flows = [
        replace(
            guarded_flow(flow_id=f"flow{i}"),
            start_s=i * gap_s,
        )
        for i in range(n_flows)
    ]
    return SimConfig(
        schedule=synth_constant(rate_mbps, 1.0),
        duration_s=duration_s,
        one_way_delay_s=OWD_S,
        buffer_pkts=DEEP_BUFFER,
        seed=seed,
        flows=flows,
    )
