"""Tests for trace parsing, synthesis, microsecond spreading, and capacity
counting."""

import math

import pytest

from ccguard.traces import (
    TraceSchedule,
    capacity_delivered,
    from_spec,
    parse_trace,
    synth_constant,
    synth_step,
    write_trace,
)


def test_schedule_validates_timestamps():
    with pytest.raises(ValueError):
        TraceSchedule([], 0)
    with pytest.raises(ValueError):
        TraceSchedule([0, 1], 1)
    with pytest.raises(ValueError):
        TraceSchedule([2, 1], 2)
    with pytest.raises(ValueError):
        TraceSchedule([1, 2], 3)  # loop must equal last timestamp


def test_parse_trace_burst_lines(tmp_path):
    p = tmp_path / "burst.trace"
    p.write_text("5\n5\n5\n")
    sched = parse_trace(p)
    assert sched.timestamps_ms == [5, 5, 5]
    assert sched.loop_length_ms == 5
    assert sched.opportunities_per_loop == 3


def test_parse_trace_reports_offending_line(tmp_path):
    p = tmp_path / "bad.trace"
    p.write_text("2\n1\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_trace(p)
    p.write_text("2\nx\n")
    with pytest.raises(ValueError, match="line 2"):
        parse_trace(p)
    p.write_text("0\n")
    with pytest.raises(ValueError, match="line 1"):
        parse_trace(p)
    p.write_text("\n")
    with pytest.raises(ValueError):
        parse_trace(p)


def test_write_then_parse_roundtrip(tmp_path):
    sched = TraceSchedule([1, 1, 3, 7, 7, 7, 10], 10)
    p = tmp_path / "round.trace"
    write_trace(sched, p)
    back = parse_trace(p)
    assert back.timestamps_ms == sched.timestamps_ms
    assert back.loop_length_ms == sched.loop_length_ms


def test_offsets_single_opportunity_lands_at_millisecond_edge():
    # One opportunity in millisecond m sits exactly at m ms.
    sched = TraceSchedule([1, 2, 3], 3)
    assert list(sched.offsets_us()) == [1000, 2000, 3000]


def test_offsets_same_millisecond_burst_spreads_within_it():
    sched = TraceSchedule([5, 5, 5], 5)
    offs = list(sched.offsets_us())
    assert len(offs) == 3
    assert offs[-1] == 5000  # last lands on the edge
    assert all(4000 < o <= 5000 for o in offs)  # all inside (4 ms, 5 ms]
    assert offs == sorted(offs)
    # Even spacing across the millisecond.
    gaps = {b - a for a, b in zip(offs, offs[1:])}
    assert len(gaps) == 1


def test_cumulative_counts_match_trace_at_millisecond_boundaries():
    sched = TraceSchedule([1, 1, 2, 4, 4, 4, 5], 5)
    for ms in range(1, 6):
        expected = sum(1 for t in sched.timestamps_ms if t <= ms)
        assert sched.opportunities_until(ms * 1000) == expected


def test_opportunities_until_loops_cyclically():
    sched = TraceSchedule([1, 2, 3], 3)
    per_loop = sched.opportunities_per_loop
    assert sched.opportunities_until(3000) == per_loop
    assert sched.opportunities_until(6000) == 2 * per_loop
    assert sched.opportunities_until(7000) == 2 * per_loop + 1
    assert sched.opportunities_until(0) == 0
    assert sched.opportunities_until(-5) == 0


def test_next_opportunity_is_inclusive_at_or_after():
    sched = TraceSchedule([1, 2, 3], 3)
    assert sched.next_opportunity(0) == 1000
    assert sched.next_opportunity(1000) == 1000  # at-or-after contract
    assert sched.next_opportunity(1001) == 2000
    assert sched.next_opportunity(2500) == 3000
    assert sched.next_opportunity(3001) == 4000  # wraps into the next loop
    assert sched.next_opportunity(999_999_999) >= 999_999_999


def test_capacity_window_is_half_open():
    sched = TraceSchedule([1, 2, 3], 3)
    # [0, 3 ms) excludes the opportunity sitting exactly at 3 ms.
    assert capacity_delivered(sched, 0.0, 0.003) == 2
    assert capacity_delivered(sched, 0.0, 0.0031) == 3
    assert capacity_delivered(sched, 0.001, 0.001) == 0  # empty window
    with pytest.raises(ValueError):
        capacity_delivered(sched, 0.002, 0.001)


def test_capacity_spans_loops():
    sched = TraceSchedule([1, 2, 3], 3)
    # Two full loops starting inside the first: (0.5 ms .. 6.5 ms) holds all
    # six opportunities (1,2,3,4,5,6 ms).
    assert capacity_delivered(sched, 0.0005, 0.0065) == 6


def test_synth_constant_rate_and_duration():
    sched = synth_constant(12.0, 10.0)
    assert sched.loop_length_ms == 10_000
    assert sched.opportunities_per_loop == 10_000  # 1 packet per ms
    assert sched.mean_rate_mbps() == pytest.approx(12.0, rel=0.005)


def test_synth_constant_realized_rate_within_half_percent():
    for rate in (3.0, 48.0, 300.0, 720.0):
        sched = synth_constant(rate, 2.0)
        assert sched.mean_rate_mbps() == pytest.approx(rate, rel=0.005)


def test_synth_constant_rejects_empty_rate():
    with pytest.raises(ValueError):
        synth_constant(0.0001, 0.001)
    with pytest.raises(ValueError):
        synth_constant(1.0, 0.0001)


def test_synth_step_concatenates_segments():
    sched = synth_step([(12.0, 1.0), (24.0, 1.0)])
    assert sched.loop_length_ms == 2000
    first = sum(1 for t in sched.timestamps_ms if t <= 1000)
    second = sum(1 for t in sched.timestamps_ms if t > 1000)
    assert first == 1000  # 12 Mbps = one 1500-byte packet per millisecond
    assert second == 2000


def test_synth_step_zero_rate_segment_is_silent_but_closes_loop():
    sched = synth_step([(12.0, 1.0), (0.0, 1.0)])
    assert sched.loop_length_ms == 2000
    assert sched.timestamps_ms[-1] == 2000
    # Exactly one closing opportunity in the silent segment.
    assert sum(1 for t in sched.timestamps_ms if t > 1000) == 1


def test_synth_step_rejects_empty_inputs():
    with pytest.raises(ValueError):
        synth_step([])
    with pytest.raises(ValueError):
        synth_step([(0.0, 1.0)])


def test_from_spec_constant_and_step():
    c = from_spec("constant:12@2")
    assert c.loop_length_ms == 2000
    assert c.mean_rate_mbps() == pytest.approx(12.0, rel=0.005)
    s = from_spec("step:12@1,24@1")
    assert s.loop_length_ms == 2000


def test_from_spec_file_path(tmp_path):
    p = tmp_path / "t.trace"
    p.write_text("1\n2\n")
    sched = from_spec(str(p))
    assert sched.timestamps_ms == [1, 2]


def test_from_spec_missing_file_raises_file_not_found():
    with pytest.raises(FileNotFoundError):
        from_spec("/nonexistent/path/foo.trace")


def test_mean_rate_accounts_for_packet_size():
    sched = TraceSchedule([1], 1)  # 1 packet per ms
    assert sched.mean_rate_mbps(1500) == pytest.approx(12.0)
    assert sched.mean_rate_mbps(750) == pytest.approx(6.0)
