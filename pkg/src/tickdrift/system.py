"""Event-driven simulation of one MCU running a tick-driven RTOS next to secure services.

Time advances in integer nanoseconds. At equal instants, a timer expiration is
processed before a window boundary, so an expiration landing exactly on a
window's end is masked and one landing exactly on its start is delivered.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .drift import validate_sections
from .kernel import IDLE, Kernel, TaskState
from .mcu import Delivery, Mcu
from .secure import AddressMap, Mode, SecureService, SecureWorld, SweepReport

log = logging.getLogger(__name__)


@dataclass
class PeriodicTask:
    """Classic periodic loop: run the body, then ``delay_until(last_wake, period)``."""

    id: int
    priority: int
    period: int  # ticks
    body: Callable | None = None  # body(sim, now, task)
    start_delay: int = 0  # ticks before the first release
    last_wake: int | None = None
    started: bool = False
    releases: list[tuple[int, int]] = field(default_factory=list)  # (time ns, absolute tick)
    nominal: list[int] = field(default_factory=list)  # wrapped tick each release was due at

    def step(self, sim: "Simulation", now: int) -> bool:
        kernel = sim.kernel
        if not self.started:
            self.started = True
            if self.start_delay and kernel.block_with_timeout(self.id, self.start_delay):
                # anchor the period on the due tick, not on when we get the CPU
                self.last_wake = kernel.tasks[self.id].wake_tick
                return True
        if self.last_wake is None:
            self.last_wake = kernel.tick_count
        self.releases.append((now, kernel.absolute_ticks))
        self.nominal.append(self.last_wake)
        sim.record("job", self.id)
        if self.body is not None:
            self.body(sim, now, self)
        self.last_wake, _ = kernel.delay_until(self.id, self.last_wake, self.period)
        return True


@dataclass
class BusyTask:
    """Always-ready CPU hog; only round-robin slicing moves it off the CPU."""

    id: int
    priority: int

    def step(self, sim: "Simulation", now: int) -> bool:
        return False


@dataclass
class TimeoutTask:
    """Repeatedly blocks on an event that never arrives, with a finite timeout."""

    id: int
    priority: int
    timeout: int
    timeouts: list[tuple[int, int]] = field(default_factory=list)
    started: bool = False

    def step(self, sim: "Simulation", now: int) -> bool:
        if self.started:
            self.timeouts.append((now, sim.kernel.absolute_ticks))
            sim.record("timeout", self.id)
        self.started = True
        sim.kernel.block_with_timeout(self.id, self.timeout)
        return True


@dataclass
class SimResult:
    mode: Mode
    run_length: int
    wall_ticks: int
    kernel_ticks: int
    final_drift: int  # ticks
    trace_counts: dict
    sweeps: list[SweepReport]
    log: list[tuple[int, str, object]]
    drift_samples: list[tuple[int, int, int]]  # (time ns, wall ticks, kernel ticks)
    pending_at_end: bool


class Simulation:
    def __init__(self, tick_period: int, mode: Mode, windows: Sequence[tuple[int, int]] = (),
                 run_length: int = 0, kernel: Kernel | None = None, tasks: Sequence = (),
                 address_map: AddressMap | None = None, record_trace: bool = True,
                 observers: Sequence[Callable] = (), drift_sample_every: int = 0,
                 service_kind: str = "generic"):
        windows = [(int(s), int(d)) for s, d in windows]
        validate_sections(windows)
        for start, dur in windows:
            if start + dur > run_length:
                raise ValueError(f"window at {start} (+{dur}) extends past the run end {run_length}")
        self.tick_period = tick_period
        self.mode = mode
        self.windows = windows if mode is not Mode.BASELINE else []
        self.run_length = run_length
        self.kernel = kernel if kernel is not None else Kernel()
        self.mcu = Mcu.with_period(tick_period, record=record_trace)
        self.secure = SecureWorld(address_map or AddressMap.default())
        self.programs = {}
        addr = self.secure.address_map.nonsecure_low + 0x1000
        for i, prog in enumerate(tasks):
            if prog.id not in self.kernel.tasks:
                self.kernel.add_task(prog.id, prog.priority, addr + 0x60 * i)
            self.programs[prog.id] = prog
        self.observers = list(observers)
        self.drift_sample_every = drift_sample_every
        self.service_kind = service_kind
        self.wall_ticks = 0
        self.now = 0
        self.log: list[tuple[int, str, object]] = []
        self.drift_samples: list[tuple[int, int, int]] = []
        self._start_abs = self.kernel.absolute_ticks
        self._win_idx = 0
        self._win_phase = 0  # 0: next boundary is a start, 1: an end

    def record(self, what: str, payload=None) -> None:
        self.log.append((self.now, what, payload))

    def kernel_elapsed(self) -> int:
        return self.kernel.absolute_ticks - self._start_abs

    def drift(self) -> int:
        return self.wall_ticks - self.kernel_elapsed()

    # ---- non-secure execution ------------------------------------------

    def _dispatch(self) -> None:
        if self.secure.active:
            raise AssertionError("Non-Secure code scheduled inside a secure service")
        kernel = self.kernel
        for _ in range(10_000):
            cur = kernel.running
            if kernel.pend_reschedule or cur is IDLE or kernel.tasks[cur].state is not TaskState.RUNNING:
                prev = cur
                cur = kernel.schedule()
                if cur != prev:
                    self.record("switch", cur)
            if cur is IDLE:
                return
            prog = self.programs.get(cur)
            if prog is None or not prog.step(self, self.now):
                return
        raise RuntimeError("dispatch did not settle")

    def _resume_nonsecure(self) -> None:
        fired = self.kernel.timer_service_run()
        for tick, tid in fired:
            self.record("timer", (tid, tick))
        self._dispatch()

    def _nonsecure_tick(self) -> None:
        self.kernel.on_tick()
        self._resume_nonsecure()

    # ---- event loop ------------------------------------------------------

    def _next_window_event(self) -> int | None:
        if self._win_idx >= len(self.windows):
            return None
        start, dur = self.windows[self._win_idx]
        return start if self._win_phase == 0 else start + dur

    def _window_event(self) -> None:
        start, dur = self.windows[self._win_idx]
        if self._win_phase == 0:
            service = SecureService(self._win_idx, dur, self.service_kind)
            self.secure.enter(service, self.kernel, self.mcu, self.mode)
            self.record("enter", self._win_idx)
            self._win_phase = 1
            return
        self.secure.finish(self.kernel)
        delivered = self.secure.exit(self.mcu, self.now)
        self.record("exit", self._win_idx)
        self._win_idx += 1
        self._win_phase = 0
        if delivered:
            self.kernel.on_tick()
        self._resume_nonsecure()

    def _tick(self) -> None:
        where = self.mcu.expire(self.now)
        self.wall_ticks += 1
        if where is Delivery.NONSECURE:
            self._nonsecure_tick()
        elif where is Delivery.SECURE:
            self.secure.tick(self.kernel)
        if self.drift_sample_every and self.wall_ticks % self.drift_sample_every == 0:
            self.drift_samples.append((self.now, self.wall_ticks, self.kernel_elapsed()))
        for obs in self.observers:
            obs(self, self.now)

    def run(self) -> SimResult:
        self.now = 0
        self._dispatch()
        while True:
            t_tick = self.mcu.timer.next_expiry
            t_win = self._next_window_event()
            if t_win is not None and t_win < t_tick:
                if t_win > self.run_length:
                    break
                self.now = t_win
                self._window_event()
            else:
                if t_tick > self.run_length:
                    break
                self.now = t_tick
                self._tick()
        return SimResult(
            mode=self.mode,
            run_length=self.run_length,
            wall_ticks=self.wall_ticks,
            kernel_ticks=self.kernel_elapsed(),
            final_drift=self.drift(),
            trace_counts=self.mcu.counts(),
            sweeps=list(self.secure.reports),
            log=self.log,
            drift_samples=self.drift_samples,
            pending_at_end=self.mcu.nvic.systick_pending,
        )
