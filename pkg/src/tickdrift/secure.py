"""Secure-world reconciliation of the Non-Secure tick state.

While a secure service runs, SysTick is routed to a secure handler that only
bumps the Non-Secure tick counter. When the service finishes, a single sweep
applies what the skipped ticks would have done to the kernel: promotions,
timer commands, round-robin rotation and the reschedule request.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .kernel import LISTS_SWITCHED, Kernel, TimerCommand
from .mcu import Mcu, Routing


class Mode(enum.Enum):
    BASELINE = "baseline"
    UNCOMPENSATED = "uncompensated"
    COMPENSATED = "compensated"


class SecureFault(RuntimeError):
    pass


@dataclass(frozen=True)
class SecureService:
    id: int
    duration: int  # ns
    kind: str = "generic"

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("service duration must be non-negative")


@dataclass
class ReconciliationState:
    entry_tick: int
    entry_slice: int
    intercepted_ticks: int = 0
    overflow_flag: bool = False
    wraps: int = 0
    active: bool = True

    def expected_tick(self, modulus: int) -> int:
        return (self.entry_tick + self.intercepted_ticks) % modulus


@dataclass(frozen=True)
class AddressMap:
    nonsecure_low: int
    nonsecure_high: int
    registered: dict = field(default_factory=dict)  # structure name -> address

    def __post_init__(self):
        if self.nonsecure_low >= self.nonsecure_high:
            raise ValueError("empty Non-Secure range")
        for name, addr in self.registered.items():
            if not self.contains(addr):
                raise ValueError(f"registered structure {name!r} at {addr:#x} is outside the Non-Secure range")

    def contains(self, addr: int) -> bool:
        return self.nonsecure_low <= addr < self.nonsecure_high

    @classmethod
    def default(cls) -> "AddressMap":
        base = 0x2000_0000
        return cls(base, base + 0x4_0000, {
            "tick_count": base + 0x100,
            "delayed_list": base + 0x110,
            "overflow_delayed_list": base + 0x124,
            "ready_lists": base + 0x140,
            "timer_queue": base + 0x200,
            "round_robin": base + 0x240,
        })


@dataclass(frozen=True)
class AddressFault:
    address: int
    what: str


def validate_address(amap: AddressMap, addr: int, what: str = "pointer") -> AddressFault | None:
    """None when ``addr`` may be dereferenced, otherwise the fault to record."""
    return None if amap.contains(addr) else AddressFault(addr, what)


@dataclass
class SweepReport:
    n: int
    promoted: list[int] = field(default_factory=list)
    rotations: int = 0  # m
    new_slice: int = 0  # s'
    rotated: bool = False
    reschedule: bool = False
    overflow: bool = False
    faults: list[AddressFault] = field(default_factory=list)

    @property
    def aborted(self) -> bool:
        return bool(self.faults)


def round_robin_closed_form(n: int, quantum: int, slice_remaining: int) -> tuple[int, int]:
    """(rotations, residual slice) after ``n`` ticks starting with ``slice_remaining`` of ``quantum``."""
    if not 1 <= slice_remaining <= quantum:
        raise ValueError("slice_remaining must lie in [1, quantum]")
    if n < 0:
        raise ValueError("n must be >= 0")
    m = (n + quantum - slice_remaining) // quantum
    if m == 0:
        return 0, slice_remaining - n
    return m, quantum - ((n + quantum - slice_remaining) % quantum)


def secure_tick_handler(recon: ReconciliationState, kernel: Kernel) -> None:
    """Per-intercepted-tick work: the counter and ``n``, nothing else."""
    if not recon.active:
        raise SecureFault("secure tick handler invoked with no active service")
    kernel.tick_count = (kernel.tick_count + 1) % kernel.modulus
    recon.intercepted_ticks += 1
    if kernel.tick_count == 0:
        recon.overflow_flag = True
        recon.wraps += 1


def _rotate(lst: list[int], k: int) -> bool:
    if k <= 0 or len(lst) < 2:
        return False
    r = k % len(lst)
    if r:
        lst[:] = lst[r:] + lst[:r]
    return True


def reconstruction_sweep(recon: ReconciliationState, kernel: Kernel, amap: AddressMap) -> SweepReport:
    """Apply the kernel effects of ``recon.intercepted_ticks`` skipped ticks in one pass."""
    if not recon.active:
        raise SecureFault("sweep with no active service")
    n = recon.intercepted_ticks
    mod = kernel.modulus
    if kernel.tick_count != recon.expected_tick(mod):
        raise SecureFault("tick counter changed outside the secure handler during the service")
    report = SweepReport(n, overflow=recon.overflow_flag)
    t0 = recon.entry_tick
    t_hat = t0 + n  # unwrapped in the entry epoch
    q = kernel.slice_quantum
    s = recon.entry_slice

    # which delayed entries fall due, each with the tick offset at which it would have
    if recon.wraps:
        due_cur = list(kernel.delayed)
        due_ovf = [e for e in kernel.overflow_delayed if e[0] + mod <= t_hat]
    else:
        due_cur = [e for e in kernel.delayed if e[0] <= t_hat]
        due_ovf = []
    due = [(e, max(1, e[0] - t0)) for e in due_cur] + [(e, max(1, e[0] + mod - t0)) for e in due_ovf]

    rp = kernel.running_priority()
    to_check = [(kernel.tasks[e[2]].address, f"delayed-list owner of task {e[2]}") for e, _ in due]
    if kernel.running is not None:
        to_check += [(kernel.tasks[t].address, f"ready-list link to task {t}") for t in kernel.ready.get(rp, [])]
    for addr, what in to_check:
        fault = validate_address(amap, addr, what)
        if fault is not None:
            report.faults.append(fault)
    if report.faults:
        return report

    # 1. delayed and timeout lists
    if recon.wraps:
        kernel.delayed = [e for e in kernel.overflow_delayed if e not in due_ovf]
        kernel.overflow_delayed = []
        kernel.overflow_count += recon.wraps
    else:
        del kernel.delayed[:len(due_cur)]
    base_len = len(kernel.ready.get(rp, []))
    for (_, _, tid), _ in due:
        kernel.make_ready(tid)
        report.promoted.append(tid)

    # 2. software timers
    if n:
        kernel.timer_queue.append(TimerCommand.advance(n))
    if recon.overflow_flag:
        kernel.timer_queue.append(LISTS_SWITCHED)

    # 3. round robin; rotations interleave with same-priority promotions at their own tick
    m, s_new = round_robin_closed_form(n, q, s)
    report.rotations, report.new_slice = m, s_new
    if kernel.running is not None and m:
        lst = kernel.ready.get(rp, [])
        original, joined = lst[:base_len], lst[base_len:]
        offsets = [off for (_, _, tid), off in due if kernel.tasks[tid].priority == rp]
        lst[:] = original
        applied = 0
        for tid, off in zip(joined, offsets):
            before = 0 if off - 1 < s else (off - 1 - s) // q + 1
            report.rotated |= _rotate(lst, before - applied)
            applied = before
            lst.append(tid)
        report.rotated |= _rotate(lst, m - applied)
    kernel.slice_remaining = s_new

    # 4. reschedule
    if report.rotated or any(kernel.tasks[t].priority > rp for t in report.promoted):
        report.reschedule = True
        kernel.pend_reschedule = True
    return report


@dataclass
class SecureWorld:
    address_map: AddressMap = field(default_factory=AddressMap.default)
    recon: ReconciliationState | None = None
    reports: list[SweepReport] = field(default_factory=list)

    @property
    def active(self) -> bool:
        return self.recon is not None and self.recon.active

    def enter(self, service: SecureService, kernel: Kernel, mcu: Mcu, mode: Mode) -> ReconciliationState:
        if self.active:
            raise SecureFault(f"secure service {service.id} entered while another is running")
        mcu.mask()
        if mode is Mode.COMPENSATED:
            mcu.set_routing(Routing.SECURE)
        self.recon = ReconciliationState(kernel.tick_count, kernel.slice_remaining)
        return self.recon

    def tick(self, kernel: Kernel) -> None:
        if self.recon is None:
            raise SecureFault("secure tick handler invoked with no active service")
        secure_tick_handler(self.recon, kernel)

    def finish(self, kernel: Kernel) -> SweepReport:
        report = reconstruction_sweep(self.recon, kernel, self.address_map)
        self.reports.append(report)
        return report

    def exit(self, mcu: Mcu, now: int) -> int:
        """Restore routing and unmask; returns the number of deferred deliveries."""
        if not self.active:
            raise SecureFault("exit without an active service")
        mcu.set_routing(Routing.NONSECURE)
        self.recon.active = False
        return mcu.unmask(now)
