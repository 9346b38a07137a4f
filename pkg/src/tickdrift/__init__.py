"""Tick-loss modelling and secure-world tick reconciliation for tick-driven RTOSes."""

from .drift import (
    AtomicSchedule,
    DriftReport,
    cumulative_drift,
    expected_drift_rate,
    expected_lost_ticks,
    expirations_in_window,
    lost_ticks,
    monte_carlo_expected_loss,
)
from .kernel import Kernel
from .secure import Mode
from .timebase import TickConfig, ms, seconds, us

__all__ = [
    "AtomicSchedule",
    "DriftReport",
    "Kernel",
    "Mode",
    "TickConfig",
    "cumulative_drift",
    "expected_drift_rate",
    "expected_lost_ticks",
    "expirations_in_window",
    "lost_ticks",
    "monte_carlo_expected_loss",
    "ms",
    "seconds",
    "us",
]
