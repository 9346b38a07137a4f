"""SysTick peripheral and the interrupt controller's view of its exception.

The controller has a single pending bit for SysTick. Setting it while it is
already set does nothing, which is exactly how masked expirations get lost.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class ConsistencyFault(RuntimeError):
    """Simulator driven out of order (e.g. expiring the timer at the wrong instant)."""


class Routing(enum.Enum):
    NONSECURE = "nonsecure"
    SECURE = "secure"


class EventKind(enum.Enum):
    EXPIRED = "TickExpired"
    DELIVERED = "TickDelivered"
    DISCARDED = "TickDiscarded"


@dataclass(frozen=True)
class InterruptEvent:
    time: int
    kind: EventKind
    target: Routing | None = None  # set for deliveries


@dataclass
class SysTickTimer:
    reload_value: int
    next_expiry: int = None
    running: bool = True

    def __post_init__(self):
        if self.reload_value <= 0:
            raise ValueError("reload_value must be positive")
        if self.next_expiry is None:
            self.next_expiry = self.reload_value


@dataclass
class NvicState:
    systick_pending: bool = False
    nonsecure_masked: bool = False
    routing: Routing = Routing.NONSECURE


class Delivery(enum.Enum):
    NONSECURE = "nonsecure"
    SECURE = "secure"
    PENDED = "pended"
    DISCARDED = "discarded"


@dataclass
class Mcu:
    timer: SysTickTimer
    nvic: NvicState = field(default_factory=NvicState)
    trace: list[InterruptEvent] = field(default_factory=list)
    record: bool = True

    @classmethod
    def with_period(cls, tick_period: int, first_expiry: int | None = None, record: bool = True) -> "Mcu":
        return cls(SysTickTimer(tick_period, first_expiry), record=record)

    def _log(self, time, kind, target=None):
        if self.record:
            self.trace.append(InterruptEvent(time, kind, target))

    def expire(self, now: int) -> Delivery:
        """Process the timer expiration due at ``now`` and say where it went."""
        timer, nvic = self.timer, self.nvic
        if not timer.running:
            raise ConsistencyFault("expire() on a stopped timer")
        if now != timer.next_expiry:
            raise ConsistencyFault(f"expire() at {now}, timer due at {timer.next_expiry}")
        timer.next_expiry += timer.reload_value
        self._log(now, EventKind.EXPIRED)
        if nvic.routing is Routing.SECURE:
            self._log(now, EventKind.DELIVERED, Routing.SECURE)
            return Delivery.SECURE
        if not nvic.nonsecure_masked:
            self._log(now, EventKind.DELIVERED, Routing.NONSECURE)
            return Delivery.NONSECURE
        if not nvic.systick_pending:
            nvic.systick_pending = True
            return Delivery.PENDED
        self._log(now, EventKind.DISCARDED)
        return Delivery.DISCARDED

    def mask(self) -> None:
        self.nvic.nonsecure_masked = True

    def unmask(self, now: int) -> int:
        """Clear the Non-Secure mask; returns the number of deferred deliveries (0 or 1)."""
        nvic = self.nvic
        nvic.nonsecure_masked = False
        if nvic.systick_pending and nvic.routing is Routing.NONSECURE:
            nvic.systick_pending = False
            self._log(now, EventKind.DELIVERED, Routing.NONSECURE)
            return 1
        return 0

    def set_routing(self, target: Routing) -> None:
        self.nvic.routing = target

    def counts(self) -> dict[str, int]:
        out = {k.value: 0 for k in EventKind}
        for ev in self.trace:
            out[ev.kind.value] += 1
        return out


def run_masked_window(start: int, duration: int, routing: Routing = Routing.NONSECURE, period: int = 100_000):
    """Drive the peripheral through one masked window; expirations at k*period, k >= 1."""
    mcu = Mcu.with_period(period)
    end = start + duration
    deliveries = []
    masked = False
    while True:
        t = mcu.timer.next_expiry
        if not masked and t > start:
            mcu.mask()
            mcu.set_routing(routing)
            masked = True
        if masked and t > end:
            break
        deliveries.append((t, mcu.expire(t)))
    mcu.set_routing(Routing.NONSECURE)
    deferred = mcu.unmask(end)
    # drain one more period unmasked
    deliveries.append((mcu.timer.next_expiry, mcu.expire(mcu.timer.next_expiry)))
    return mcu, deliveries, deferred
