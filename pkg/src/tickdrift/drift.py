"""Analytic tick-loss model.

Everything here is exact: times are integer nanoseconds and expectations are
returned as :class:`fractions.Fraction`. The functions are pure, so they double
as an oracle for the event-level simulator in :mod:`tickdrift.mcu`.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .rng import make_rng
from .timebase import NS_PER_S, TickConfig


@dataclass(frozen=True)
class AtomicSection:
    start_offset_phase: int  # ns since the last tick-grid instant
    duration: int  # ns

    def check(self, cfg: TickConfig) -> None:
        _check_window(self.start_offset_phase, self.duration, cfg)


@dataclass(frozen=True)
class AtomicSchedule:
    """Absolute-time masked windows, as ``(start_ns, duration_ns)`` pairs."""

    sections: tuple[tuple[int, int], ...] = ()
    invocation_rate: Fraction | None = None  # events per second, informational

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple((int(s), int(d)) for s, d in self.sections))
        validate_sections(self.sections)

    @classmethod
    def periodic(cls, start: int, period: int, duration: int, count: int) -> "AtomicSchedule":
        if period <= 0:
            raise ValueError("period must be positive")
        secs = tuple((start + i * period, duration) for i in range(count))
        return cls(secs, Fraction(NS_PER_S, period))

    def __len__(self):
        return len(self.sections)


def validate_sections(sections: Sequence[tuple[int, int]]) -> None:
    prev_end = None
    for start, duration in sections:
        if duration < 0:
            raise ValueError(f"negative section duration {duration}")
        if start < 0:
            raise ValueError(f"negative section start {start}")
        if prev_end is not None and start < prev_end:
            raise ValueError(f"section at {start} overlaps or precedes the previous one (ends {prev_end})")
        prev_end = start + duration


@dataclass(frozen=True)
class DriftReport:
    per_section_lost: tuple[int, ...] = ()
    phases: tuple[int, ...] = ()
    cumulative_lost: int = 0
    expected_rate: Fraction | None = None  # lost ticks per second
    tick_period: int = 0

    @property
    def cumulative_lost_ns(self) -> int:
        return self.cumulative_lost * self.tick_period


@dataclass(frozen=True)
class DriftRate:
    expectation: Fraction | None  # expectation over the duration distribution
    mean_approximation: Fraction  # rate * max(0, mean/T - 1)


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    samples: int
    seed: int
    draws: np.ndarray = field(repr=False, compare=False, default=None)

    def within(self, expected, n_se: float = 3.0) -> bool:
        return abs(self.mean - float(expected)) <= n_se * self.stderr


def _check_window(phase: int, duration: int, cfg: TickConfig) -> None:
    if not 0 <= phase < cfg.tick_period:
        raise ValueError(f"phase {phase} outside [0, {cfg.tick_period})")
    if duration < 0:
        raise ValueError(f"negative duration {duration}")


def expirations_in_window(phase: int, duration: int, cfg: TickConfig) -> int:
    """Tick-grid instants in ``(start, start + duration]`` for a window starting ``phase`` after one.

    An expiration landing exactly on the window end counts as inside it.
    """
    _check_window(phase, duration, cfg)
    return (phase + duration) // cfg.tick_period


def lost_ticks(phase: int, duration: int, cfg: TickConfig) -> int:
    return max(0, expirations_in_window(phase, duration, cfg) - 1)


def section_phases(sections: Sequence[tuple[int, int]], cfg: TickConfig, first_phase: int = 0) -> list[int]:
    """Phase of every section on the hardware tick grid fixed by the first one.

    The timer keeps its own cadence across masked windows, so the grid is
    never re-anchored by a deferred delivery.
    """
    if not sections:
        return []
    if not 0 <= first_phase < cfg.tick_period:
        raise ValueError(f"first_phase {first_phase} outside [0, {cfg.tick_period})")
    origin = sections[0][0] - first_phase
    return [(start - origin) % cfg.tick_period for start, _ in sections]


def cumulative_drift(schedule: AtomicSchedule, cfg: TickConfig, first_phase: int = 0) -> DriftReport:
    validate_sections(schedule.sections)
    phases = section_phases(schedule.sections, cfg, first_phase)
    lost = tuple(lost_ticks(p, d, cfg) for p, (_, d) in zip(phases, schedule.sections))
    rate = None
    if schedule.invocation_rate is not None and schedule.sections:
        durations = [d for _, d in schedule.sections]
        rate = expected_drift_rate(schedule.invocation_rate, durations, cfg).expectation
    return DriftReport(lost, tuple(phases), sum(lost), rate, cfg.tick_period)


def expected_lost_ticks(duration: int, cfg: TickConfig) -> Fraction:
    """Mean tick loss for a fixed duration over a uniformly distributed start phase."""
    if duration < 0:
        raise ValueError(f"negative duration {duration}")
    return max(Fraction(0), Fraction(duration, cfg.tick_period) - 1)


def _as_distribution(durations) -> dict[int, Fraction]:
    if isinstance(durations, Mapping):
        dist = {int(d): Fraction(p) for d, p in durations.items()}
    else:
        counts: dict[int, int] = {}
        for d in durations:
            counts[int(d)] = counts.get(int(d), 0) + 1
        total = sum(counts.values())
        dist = {d: Fraction(c, total) for d, c in counts.items()}
    if not dist:
        raise ValueError("empty duration distribution")
    if sum(dist.values()) != 1 or any(p < 0 for p in dist.values()):
        raise ValueError("duration probabilities must be non-negative and sum to 1")
    return dist


def expected_drift_rate(rate, durations, cfg: TickConfig) -> DriftRate:
    """Lost ticks per second for sections arriving at ``rate`` per second.

    ``durations`` is a mean duration (int ns), a ``{duration_ns: probability}``
    mapping, or a sequence of observed durations. The full expectation is only
    available when a distribution is given; the mean-duration approximation is
    always returned.
    """
    rate = Fraction(str(rate)) if isinstance(rate, float) else Fraction(rate)
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if isinstance(durations, (int, np.integer)):
        return DriftRate(None, rate * expected_lost_ticks(int(durations), cfg))
    dist = _as_distribution(durations)
    expectation = rate * sum(p * expected_lost_ticks(d, cfg) for d, p in dist.items())
    mean = sum(p * d for d, p in dist.items())
    approx = rate * max(Fraction(0), mean / cfg.tick_period - 1)
    return DriftRate(expectation, approx)


def monte_carlo_expected_loss(duration: int, cfg: TickConfig, samples: int, seed: int) -> MonteCarloResult:
    """Empirical mean of :func:`lost_ticks` over phases drawn uniformly from the ns grid of ``[0, T)``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if duration < 0:
        raise ValueError(f"negative duration {duration}")
    rng = make_rng(seed, 0xD81F7)
    phase = rng.integers(0, cfg.tick_period, size=samples, dtype=np.int64)
    draws = np.maximum((phase + duration) // cfg.tick_period - 1, 0)
    mean = float(draws.mean())
    stderr = float(draws.std(ddof=1)) / math.sqrt(samples) if samples > 1 else 0.0
    return MonteCarloResult(mean, stderr, samples, seed, draws)
