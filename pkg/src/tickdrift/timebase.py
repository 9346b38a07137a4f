"""Integer nanosecond time base shared by every module."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


def ms(value) -> int:
    """Milliseconds to integer nanoseconds; rejects values that do not land on a nanosecond."""
    return _to_ns(value, NS_PER_MS)


def us(value) -> int:
    return _to_ns(value, NS_PER_US)


def seconds(value) -> int:
    return _to_ns(value, NS_PER_S)


def _to_ns(value, scale: int) -> int:
    # str() round-trip so that 0.1 means 1/10 rather than its binary approximation
    exact = Fraction(str(value)) if isinstance(value, float) else Fraction(value)
    ns = exact * scale
    if ns.denominator != 1:
        raise ValueError(f"{value} does not resolve to an integer number of nanoseconds")
    return int(ns)


@dataclass(frozen=True)
class TickConfig:
    tick_period: int  # ns

    def __post_init__(self):
        if not isinstance(self.tick_period, int) or isinstance(self.tick_period, bool):
            raise TypeError("tick_period must be an integer number of nanoseconds")
        if self.tick_period <= 0:
            raise ValueError("tick_period must be positive")

    @property
    def frequency_hz(self) -> Fraction:
        return Fraction(NS_PER_S, self.tick_period)

    def ticks_to_ms(self, ticks) -> Fraction:
        return Fraction(ticks) * self.tick_period / NS_PER_MS


DEFAULT_TICK = TickConfig(ms(0.1))
