"""Randomised equivalence checks between the one-shot sweep and per-tick replay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import Kernel, TaskState
from .rng import make_rng
from .secure import AddressMap, ReconciliationState, reconstruction_sweep, round_robin_closed_form, secure_tick_handler

MUTATIONS = ("skip_timer_command", "skip_promotion", "stale_slice")


def random_kernel(rng: np.random.Generator, amap: AddressMap | None = None) -> Kernel:
    """A kernel reached by driving the reference handler through random operations."""
    amap = amap or AddressMap.default()
    width = int(rng.choice([8, 8, 16, 32]))
    quantum = int(rng.integers(1, 13))
    mod = 1 << width
    if width == 8 or rng.random() < 0.3:
        start = int(mod - 1 - rng.integers(0, 80)) % mod  # near the wrap
    else:
        start = int(rng.integers(0, mod))
    k = Kernel(width=width, slice_quantum=quantum, tick_count=start)
    base = amap.nonsecure_low + 0x1000
    for tid in range(int(rng.integers(1, 8))):
        k.add_task(tid, int(rng.integers(0, 4)), base + 0x60 * tid)
    for j in range(int(rng.integers(0, 5))):
        k.add_timer(100 + j, int(rng.integers(1, 41)), bool(rng.random() < 0.7))
    k.schedule()
    horizon = 2 * (5 * quantum + 3)
    for _ in range(int(rng.integers(0, 30))):
        for t in list(k.tasks.values()):
            if t.state in (TaskState.READY, TaskState.RUNNING) and rng.random() < 0.35:
                delta = int(rng.integers(1, horizon + 1)) if rng.random() < 0.9 else int(rng.integers(1, min(mod, 300)))
                if rng.random() < 0.5:
                    k.block_with_timeout(t.id, delta)
                else:
                    k.delay_until(t.id, k.tick_count, delta)
        k.on_tick()
        if rng.random() < 0.6:
            k.timer_service_run()
        if k.pend_reschedule and rng.random() < 0.8:
            k.schedule()
    if rng.random() < 0.5:
        k.schedule()
    return k


def replay(kernel: Kernel, n: int) -> Kernel:
    k = kernel.copy()
    for _ in range(n):
        k.on_tick()
    return k


def sweep(kernel: Kernel, n: int, amap: AddressMap | None = None, mutation: str | None = None):
    k = kernel.copy()
    recon = ReconciliationState(k.tick_count, k.slice_remaining)
    for _ in range(n):
        secure_tick_handler(recon, k)
    if mutation == "stale_slice":
        recon.entry_slice = k.slice_quantum + 1 - recon.entry_slice
    report = reconstruction_sweep(recon, k, amap or AddressMap.default())
    if mutation == "skip_timer_command":
        k.timer_queue = [c for c in k.timer_queue if c.ticks == 0]
    elif mutation == "skip_promotion" and report.promoted:
        tid = report.promoted[-1]
        task = k.tasks[tid]
        k.ready[task.priority].remove(tid)
        if not k.ready[task.priority]:
            del k.ready[task.priority]
    return k, report


def diff_snapshots(a: dict, b: dict) -> list[str]:
    return [key for key in a if a[key] != b.get(key)] + [key for key in b if key not in a]


def compare(swept: Kernel, replayed: Kernel) -> list[str]:
    """Fields that differ; the timer queues are compared after both are drained."""
    diffs = diff_snapshots(swept.snapshot(include_timer_queue=False), replayed.snapshot(include_timer_queue=False))
    a, b = swept.copy(), replayed.copy()
    fa, fb = a.timer_service_run(), b.timer_service_run()
    if fa != fb:
        diffs.append("timer_firings")
    diffs += [f"after_drain.{d}" for d in diff_snapshots(a.snapshot(), b.snapshot()) if f"after_drain.{d}" not in diffs]
    return diffs


@dataclass
class Mismatch:
    case: int
    n: int
    fields: list[str]
    kernel: str


@dataclass
class OracleReport:
    cases: int = 0
    wrap_cases: int = 0
    wraps_by_width: dict[int, int] = field(default_factory=dict)
    mismatches: list[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def run_sweep_oracle(cases: int, seed: int, mutation: str | None = None, max_n: int | None = None) -> OracleReport:
    report = OracleReport()
    for i in range(cases):
        rng = make_rng(seed, 1, i)
        k = random_kernel(rng)
        q = k.slice_quantum
        n = int(rng.integers(0, (max_n if max_n is not None else 5 * q + 3) + 1))
        swept, _ = sweep(k, n, mutation=mutation)
        replayed = replay(k, n)
        report.cases += 1
        if replayed.overflow_count > k.overflow_count:
            report.wrap_cases += 1
            report.wraps_by_width[k.width] = report.wraps_by_width.get(k.width, 0) + 1
        fields = compare(swept, replayed)
        if fields:
            report.mismatches.append(Mismatch(i, n, fields, k.serialize()))
    return report


def round_robin_bruteforce(n: int, quantum: int, slice_remaining: int) -> tuple[int, int]:
    s, rotations = slice_remaining, 0
    for _ in range(n):
        s -= 1
        if s == 0:
            rotations += 1
            s = quantum
    return rotations, s


def run_round_robin_oracle(max_quantum: int = 12) -> tuple[int, list[tuple[int, int, int]]]:
    """Exhaustive closed-form check; returns (cases, failing (Q, s, n))."""
    cases, bad = 0, []
    for q in range(1, max_quantum + 1):
        for s in range(1, q + 1):
            for n in range(0, 5 * q + 1):
                cases += 1
                if round_robin_closed_form(n, q, s) != round_robin_bruteforce(n, q, s):
                    bad.append((q, s, n))
    return cases, bad
