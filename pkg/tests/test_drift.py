import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickdrift.drift import (
    AtomicSchedule,
    cumulative_drift,
    expected_drift_rate,
    expected_lost_ticks,
    expirations_in_window,
    lost_ticks,
    monte_carlo_expected_loss,
    section_phases,
)
from tickdrift.timebase import TickConfig, ms, seconds

T = TickConfig(ms(0.1))


def brute_force_expirations(phase, duration, period):
    """Count grid instants k*period (k >= 1) in (phase, phase + duration] by enumeration."""
    return sum(1 for k in range(1, (phase + duration) // period + 2) if phase < k * period <= phase + duration)


@pytest.mark.parametrize("phase, duration, expected", [
    (0, ms(0.05), 0),
    (ms(0.05), ms(0.17), 2),
    (ms(0.09), ms(0.01), 1),  # expiration exactly at the window end counts
])
def test_expirations_examples(phase, duration, expected):
    assert expirations_in_window(phase, duration, T) == expected


@pytest.mark.parametrize("phase, duration, expected", [
    (ms(0.05), ms(0.17), 1),
    (0, 0, 0),
    (ms(0.0999), 0, 0),
    (0, seconds(2.91), 29099),
])
def test_lost_ticks_examples(phase, duration, expected):
    assert lost_ticks(phase, duration, T) == expected


@pytest.mark.parametrize("phase, duration", [(-1, 0), (T.tick_period, 0), (0, -1)])
def test_window_preconditions(phase, duration):
    with pytest.raises(ValueError):
        expirations_in_window(phase, duration, T)


@given(phase=st.integers(0, 10**6 - 1), duration=st.integers(0, 10**8), period=st.integers(1, 10**6))
def test_expirations_match_rational_and_enumeration(phase, duration, period):
    cfg = TickConfig(period)
    phase %= period
    got = expirations_in_window(phase, duration, cfg)
    assert got == math.floor(Fraction(phase + duration, period))
    if duration // period < 200:
        assert got == brute_force_expirations(phase, duration, period)


@given(phase=st.integers(0, T.tick_period - 1), a=st.integers(0, 10**7), b=st.integers(0, 10**7))
def test_lost_ticks_monotone_in_duration(phase, a, b):
    lo, hi = sorted((a, b))
    assert lost_ticks(phase, lo, T) <= lost_ticks(phase, hi, T)


@pytest.mark.parametrize("duration", [0, 1, ms(0.05), ms(0.0999), T.tick_period - 1])
def test_short_windows_never_lose(duration):
    for phase in range(0, T.tick_period, 997):
        assert lost_ticks(phase, duration, T) == 0
    assert lost_ticks(T.tick_period - 1, duration, T) == 0


def test_cumulative_empty():
    report = cumulative_drift(AtomicSchedule(), T)
    assert report.cumulative_lost == 0
    assert report.per_section_lost == ()


def test_cumulative_thousand_two_tick_sections():
    sched = AtomicSchedule.periodic(start=seconds(5), period=ms(10), duration=ms(0.2), count=1000)
    report = cumulative_drift(sched, T)
    assert report.per_section_lost == (1,) * 1000
    assert report.cumulative_lost == 1000
    assert report.cumulative_lost_ns == ms(100)
    assert report.expected_rate == 100


def test_phases_follow_the_hardware_grid():
    # grid origin at 0: the second section starts 0.03 ms after a grid instant
    secs = [(ms(0.25), ms(0.3)), (ms(1.03), ms(0.1))]
    assert section_phases(secs, T, first_phase=ms(0.05)) == [ms(0.05), ms(0.03)]


def test_overlapping_schedule_rejected():
    with pytest.raises(ValueError):
        AtomicSchedule(((0, ms(1)), (ms(0.5), ms(1))))
    with pytest.raises(ValueError):
        AtomicSchedule(((ms(2), ms(1)), (ms(1), ms(0.1))))


section_lists = st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 10**6)), max_size=30).map(
    lambda gaps: [(sum(g + d for g, d in gaps[:i]) + gaps[i][0], gaps[i][1]) for i in range(len(gaps))]
)


@given(section_lists, st.integers(0, T.tick_period - 1))
def test_report_is_additive(sections, phase):
    report = cumulative_drift(AtomicSchedule(tuple(sections)), T, first_phase=phase)
    assert report.cumulative_lost == sum(report.per_section_lost)
    assert len(report.per_section_lost) == len(sections)


@pytest.mark.parametrize("duration, expected", [
    (ms(0.1), 0),
    (ms(0.05), 0),
    (seconds(0.238), 2379),
    (ms(0.25), Fraction(3, 2)),
])
def test_expected_lost_ticks(duration, expected):
    assert expected_lost_ticks(duration, T) == expected


def test_expected_drift_rate_mean_only():
    rate = expected_drift_rate(100, ms(0.2), T)
    assert rate.mean_approximation == 100
    assert rate.expectation is None
    assert expected_drift_rate(0, ms(5), T).mean_approximation == 0


def test_expected_drift_rate_distribution():
    assert expected_drift_rate(10, {ms(0.05): 1}, T).expectation == 0
    # Jensen gap: mean 0.1 ms loses nothing under the approximation, the mix does
    rate = expected_drift_rate(10, {ms(0.05): Fraction(1, 2), ms(0.15): Fraction(1, 2)}, T)
    assert rate.expectation == Fraction(10, 4)
    assert rate.mean_approximation == 0
    empirical = expected_drift_rate(100, [ms(0.2)] * 3, T)
    assert empirical.expectation == empirical.mean_approximation == 100


def test_monte_carlo_examples():
    res = monte_carlo_expected_loss(ms(0.25), T, samples=10**6, seed=7)
    assert res.within(1.5)
    res = monte_carlo_expected_loss(ms(0.1), T, samples=10**6, seed=7)
    assert res.mean == 0 and res.stderr == 0
    res = monte_carlo_expected_loss(0, T, samples=10, seed=1)
    assert res.mean == 0


def test_monte_carlo_is_deterministic():
    a = monte_carlo_expected_loss(ms(0.37), T, samples=1000, seed=42)
    b = monte_carlo_expected_loss(ms(0.37), T, samples=1000, seed=42)
    c = monte_carlo_expected_loss(ms(0.37), T, samples=1000, seed=43)
    assert np.array_equal(a.draws, b.draws)
    assert not np.array_equal(a.draws, c.draws)


@settings(max_examples=20, deadline=None)
@given(ratio_num=st.integers(10, 60))
def test_monte_carlo_converges_for_long_windows(ratio_num):
    duration = T.tick_period * ratio_num // 10
    res = monte_carlo_expected_loss(duration, T, samples=10**5, seed=ratio_num)
    assert res.within(expected_lost_ticks(duration, T))
