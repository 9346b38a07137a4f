"""Tick-driven RTOS timekeeping model with FreeRTOS semantics.

Only the state a tick can touch is modelled: the wrapping tick counter, the
current/overflow delayed lists, per-priority ready lists with a time slice,
the software-timer command queue, and the pend-reschedule flag. Tasks run as
zero-duration callbacks owned by :mod:`tickdrift.system`.
"""

from __future__ import annotations

import bisect
import copy
import enum
import json
from dataclasses import dataclass, field

IDLE = None  # schedule() result when nothing is ready


class TaskState(enum.Enum):
    READY = "ready"
    RUNNING = "running"
    DELAYED = "delayed"  # delay_until
    BLOCKED = "blocked"  # blocked with a timeout


@dataclass
class Task:
    id: int
    priority: int
    address: int
    state: TaskState = TaskState.READY
    wake_tick: int | None = None


@dataclass
class SoftwareTimer:
    id: int
    period: int
    expiry_tick: int  # wrapped, in the timer service's notion of time
    auto_reload: bool = True
    active: bool = True
    callback_log: list[int] = field(default_factory=list)


class CommandKind(enum.Enum):
    ADVANCE = "advance"
    LISTS_SWITCHED = "lists_switched"


@dataclass(frozen=True)
class TimerCommand:
    kind: CommandKind
    ticks: int = 0

    def __post_init__(self):
        if self.kind is CommandKind.ADVANCE and self.ticks < 1:
            raise ValueError("AdvanceTicks needs n >= 1")

    @classmethod
    def advance(cls, n: int) -> "TimerCommand":
        return cls(CommandKind.ADVANCE, n)


LISTS_SWITCHED = TimerCommand(CommandKind.LISTS_SWITCHED)


@dataclass
class TickOutcome:
    promoted: list[int]
    rotated: bool
    wrapped: bool


@dataclass
class Kernel:
    width: int = 32
    slice_quantum: int = 5
    tick_count: int = 0
    overflow_count: int = 0
    tasks: dict[int, Task] = field(default_factory=dict)
    # (wake, seq, task_id), kept sorted
    delayed: list[tuple[int, int, int]] = field(default_factory=list)
    overflow_delayed: list[tuple[int, int, int]] = field(default_factory=list)
    # priority -> task ids, head first; the running task stays in its list
    ready: dict[int, list[int]] = field(default_factory=dict)
    running: int | None = IDLE
    slice_remaining: int = None
    pend_reschedule: bool = False
    timer_queue: list[TimerCommand] = field(default_factory=list)
    timers: dict[int, SoftwareTimer] = field(default_factory=dict)
    timer_time: int = None
    timer_current: list[tuple[int, int]] = field(default_factory=list)
    timer_overflow: list[tuple[int, int]] = field(default_factory=list)
    fired: list[tuple[int, int]] = field(default_factory=list)  # (tick, timer id)
    seq: int = 0

    def __post_init__(self):
        if self.width < 2:
            raise ValueError("counter width must be >= 2 bits")
        if self.slice_quantum < 1:
            raise ValueError("slice quantum must be >= 1")
        if self.slice_remaining is None:
            self.slice_remaining = self.slice_quantum
        if self.timer_time is None:
            self.timer_time = self.tick_count

    @property
    def modulus(self) -> int:
        return 1 << self.width

    @property
    def absolute_ticks(self) -> int:
        """Tick count with wraps unfolded."""
        return self.overflow_count * self.modulus + self.tick_count

    def running_priority(self) -> int:
        return -1 if self.running is IDLE else self.tasks[self.running].priority

    # ---- task management -------------------------------------------------

    def add_task(self, task_id: int, priority: int, address: int) -> Task:
        if task_id in self.tasks:
            raise ValueError(f"duplicate task id {task_id}")
        task = Task(task_id, priority, address)
        self.tasks[task_id] = task
        self.ready.setdefault(priority, []).append(task_id)
        return task

    def _next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def _remove_ready(self, task: Task) -> None:
        lst = self.ready[task.priority]
        lst.remove(task.id)
        if not lst:
            del self.ready[task.priority]

    def make_ready(self, task_id: int) -> None:
        task = self.tasks[task_id]
        task.state = TaskState.READY
        task.wake_tick = None
        self.ready.setdefault(task.priority, []).append(task_id)

    def _block(self, task_id: int, wake: int, state: TaskState, overflowed: bool) -> None:
        task = self.tasks[task_id]
        if task.state not in (TaskState.READY, TaskState.RUNNING):
            raise ValueError(f"task {task_id} is not runnable")
        self._remove_ready(task)
        task.state = state
        task.wake_tick = wake
        entry = (wake, self._next_seq(), task_id)
        bisect.insort(self.overflow_delayed if overflowed else self.delayed, entry)
        if task_id == self.running:
            self.pend_reschedule = True

    def delay_until(self, task_id: int, last_wake: int, period: int) -> tuple[int, bool]:
        """Block until ``last_wake + period``; returns ``(new_last_wake, blocked)``.

        A wake time that is already due (including exactly now) releases the
        task immediately without blocking.
        """
        if period < 1:
            raise ValueError("period must be >= 1")
        if period >= self.modulus:
            raise ValueError("period must be smaller than the counter range")
        now = self.tick_count
        wake = (last_wake + period) % self.modulus
        if now < last_wake:
            # the counter wrapped since last_wake
            should_delay = last_wake > wake > now
        else:
            should_delay = wake < last_wake or wake > now
        if should_delay:
            self._block(task_id, wake, TaskState.DELAYED, overflowed=wake < now)
        return wake, should_delay

    def block_with_timeout(self, task_id: int, timeout: int) -> bool:
        """Block for ``timeout`` ticks; a zero timeout times out immediately (returns False)."""
        if timeout < 0:
            raise ValueError("timeout must be >= 0")
        if timeout == 0:
            return False
        if timeout >= self.modulus:
            raise ValueError("timeout must be smaller than the counter range")
        wake = (self.tick_count + timeout) % self.modulus
        self._block(task_id, wake, TaskState.BLOCKED, overflowed=wake < self.tick_count)
        return True

    # ---- the tick --------------------------------------------------------

    def _promote_due(self, limit: int) -> list[int]:
        promoted = []
        while self.delayed and self.delayed[0][0] <= limit:
            _, _, tid = self.delayed.pop(0)
            self.make_ready(tid)
            promoted.append(tid)
        return promoted

    def on_tick(self) -> TickOutcome:
        """Reference handler for one delivered tick."""
        self.tick_count = (self.tick_count + 1) % self.modulus
        wrapped = self.tick_count == 0
        if wrapped:
            self.overflow_count += 1
            self.delayed, self.overflow_delayed = self.overflow_delayed, self.delayed
            self.timer_queue.append(LISTS_SWITCHED)
        running_prio = self.running_priority()
        promoted = self._promote_due(self.tick_count)
        if any(self.tasks[t].priority > running_prio for t in promoted):
            self.pend_reschedule = True
        self.timer_queue.append(TimerCommand.advance(1))
        rotated = False
        self.slice_remaining -= 1
        if self.slice_remaining == 0:
            self.slice_remaining = self.slice_quantum
            lst = self.ready.get(running_prio) if self.running is not IDLE else None
            if lst and len(lst) > 1:
                lst.append(lst.pop(0))
                rotated = True
                self.pend_reschedule = True
        return TickOutcome(promoted, rotated, wrapped)

    # ---- scheduling ------------------------------------------------------

    def schedule(self) -> int | None:
        """Run the head of the highest-priority ready list (or idle)."""
        self.pend_reschedule = False
        prev = self.running
        if self.ready:
            top = max(self.ready)
            chosen = self.ready[top][0]
        else:
            chosen = IDLE
        if prev is not IDLE and prev in self.tasks and self.tasks[prev].state is TaskState.RUNNING:
            self.tasks[prev].state = TaskState.READY
        if chosen is not IDLE:
            self.tasks[chosen].state = TaskState.RUNNING
        # the slice counter is owned by the tick path; a switch does not refill it
        self.running = chosen
        return chosen

    # ---- software timers -------------------------------------------------

    def add_timer(self, timer_id: int, period: int, auto_reload: bool = True) -> SoftwareTimer:
        if period < 1 or period >= self.modulus:
            raise ValueError("timer period out of range")
        if timer_id in self.timers:
            raise ValueError(f"duplicate timer id {timer_id}")
        total = self.timer_time + period
        timer = SoftwareTimer(timer_id, period, total % self.modulus, auto_reload)
        self.timers[timer_id] = timer
        bisect.insort(self.timer_overflow if total >= self.modulus else self.timer_current,
                      (timer.expiry_tick, timer_id))
        return timer

    def timer_service_run(self) -> list[tuple[int, int]]:
        """Drain the command queue and fire every timer that came due.

        Auto-reload timers fire once per elapsed period (full catch-up), each
        firing logged at the tick it logically belonged to. Timers on the
        overflow list are only considered when a lists-switched command was
        received.
        """
        if not self.timer_queue:
            return []
        advance = sum(c.ticks for c in self.timer_queue if c.kind is CommandKind.ADVANCE)
        switches = sum(1 for c in self.timer_queue if c.kind is CommandKind.LISTS_SWITCHED)
        self.timer_queue.clear()
        mod = self.modulus
        start = self.timer_time
        end = start + advance  # relative to the current epoch, unwrapped
        # unwrapped expiry for every live timer
        pending = [(exp, tid) for exp, tid in self.timer_current]
        if switches:
            pending += [(exp + mod, tid) for exp, tid in self.timer_overflow]
            overflow_left = []
        else:
            overflow_left = list(self.timer_overflow)
        pending.sort()
        fired = []
        live = []
        heap = pending
        while heap and heap[0][0] <= end:
            exp, tid = heap.pop(0)
            timer = self.timers[tid]
            fired.append((exp % mod, tid))
            timer.callback_log.append(exp % mod)
            if timer.auto_reload:
                bisect.insort(heap, (exp + timer.period, tid))
            else:
                timer.active = False
        live = heap
        new_epoch_shift = (end // mod) * mod
        self.timer_time = end % mod
        current, overflow = [], list(overflow_left)
        for exp, tid in live:
            rel = exp - new_epoch_shift
            self.timers[tid].expiry_tick = rel % mod
            (overflow if rel >= mod else current).append((rel % mod, tid))
        self.timer_current = sorted(current)
        self.timer_overflow = sorted(overflow)
        self.fired.extend(fired)
        return fired

    # ---- snapshots -------------------------------------------------------

    def copy(self) -> "Kernel":
        return copy.deepcopy(self)

    def snapshot(self, include_timer_queue: bool = True) -> dict:
        """Plain, field-ordered view of the whole kernel for equality checks."""
        snap = {
            "width": self.width,
            "tick_count": self.tick_count,
            "overflow_count": self.overflow_count,
            "slice_quantum": self.slice_quantum,
            "slice_remaining": self.slice_remaining,
            "running": self.running,
            "pend_reschedule": self.pend_reschedule,
            "tasks": [[t.id, t.priority, t.address, t.state.value, t.wake_tick]
                      for t in sorted(self.tasks.values(), key=lambda t: t.id)],
            "delayed": [list(e) for e in self.delayed],
            "overflow_delayed": [list(e) for e in self.overflow_delayed],
            "ready": [[p, list(self.ready[p])] for p in sorted(self.ready)],
            "timer_time": self.timer_time,
            "timers": [[t.id, t.period, t.expiry_tick, t.auto_reload, t.active, list(t.callback_log)]
                       for t in sorted(self.timers.values(), key=lambda t: t.id)],
            "timer_current": [list(e) for e in self.timer_current],
            "timer_overflow": [list(e) for e in self.timer_overflow],
            "fired": [list(e) for e in self.fired],
            "seq": self.seq,
        }
        if include_timer_queue:
            snap["timer_queue"] = [[c.kind.value, c.ticks] for c in self.timer_queue]
        return snap

    def serialize(self, include_timer_queue: bool = True) -> str:
        return json.dumps(self.snapshot(include_timer_queue), separators=(",", ":"))
